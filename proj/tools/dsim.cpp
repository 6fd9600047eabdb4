// dsim: experiment runner for the distributed D-iteration simulator.
//
//   dsim run <config> [--out DIR] [--seed S]
//   dsim stats <edge-list> --n-limit N
//   dsim gen --n N --alpha A --seed S --out FILE [--ordering random|out_degree|in_degree|none]

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "diter/diter.hpp"

namespace {

int cmd_run(const std::string& config, const std::string& out_flag, const std::optional<std::uint64_t>& seed) {
  auto spec = diter::parse_config(config);
  if (seed) spec.seed = *seed;
  std::string out_dir = out_flag;
  if (out_dir.empty()) out_dir = spec.out_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("DITER_OUT_DIR");
    out_dir = env && *env ? env : "out";
  }
  const auto res = diter::run_experiment(spec, out_dir, &std::cerr);
  diter::write_experiment_summary(std::cout, res);
  return res.all_converged ? 0 : 2;
}

int cmd_stats(const std::string& path, long long n_limit) {
  const auto g = diter::load_edge_list(path, n_limit);
  std::cout << diter::stats_csv_header() << '\n' << diter::stats_csv_row(diter::stats(g)) << '\n';
  return 0;
}

int cmd_gen(std::size_t n, double alpha, std::uint64_t seed, const std::string& ordering, const std::string& out) {
  auto g = diter::synth_power_law(n, alpha, seed);
  if (ordering == "random") g = diter::reorder_nodes(g, diter::NodeOrdering::random(seed));
  else if (ordering == "out_degree") g = diter::reorder_nodes(g, diter::NodeOrdering::by_out_degree_desc());
  else if (ordering == "in_degree") g = diter::reorder_nodes(g, diter::NodeOrdering::by_in_degree_desc());
  else if (ordering != "none") throw std::invalid_argument("unknown ordering: " + ordering);
  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot open for writing: " + out);
  file << "# power-law graph n=" << n << " alpha=" << alpha << " seed=" << seed << " ordering=" << ordering << '\n';
  diter::write_edge_list(file, g);
  std::cerr << diter::stats_csv_header() << '\n' << diter::stats_csv_row(diter::stats(g)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed D-iteration simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment grid from a key=value config");
  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
  run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides config and DITER_OUT_DIR)");
  run->add_option("--seed", seed, "Override the config seed");

  auto* st = app.add_subcommand("stats", "Print n,l,avg_deg,dangling for an edge list");
  std::string edge_list;
  long long n_limit = 0;
  st->add_option("edge-list", edge_list, "Edge-list file")->required()->check(CLI::ExistingFile);
  st->add_option("--n-limit", n_limit, "Keep nodes 0..N-1")->required();

  auto* gen = app.add_subcommand("gen", "Write a synthetic power-law edge list");
  std::size_t n = 0;
  double alpha = 1.5;
  std::uint64_t gen_seed = 1;
  std::string gen_out, ordering = "none";
  gen->add_option("--n", n, "Node count")->required();
  gen->add_option("--alpha", alpha, "Power-law exponent")->default_val(1.5);
  gen->add_option("--seed", gen_seed, "Seed")->default_val(1);
  gen->add_option("--ordering", ordering, "none|random|out_degree|in_degree")->default_val("none");
  gen->add_option("--out", gen_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out_dir, seed);
    if (*st) return cmd_stats(edge_list, n_limit);
    if (*gen) return cmd_gen(n, alpha, gen_seed, ordering, gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

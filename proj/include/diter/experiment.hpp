#pragma once

// Declarative experiment grids: a flat key=value config names a graph source
// and a sweep over PID counts and partition variants.
//
// Keys (defaults in brackets):
//   source        synthetic | edge_list                      (required)
//   k_list        comma-separated PID counts                 (required)
//   n             node count for synthetic graphs            (required for synthetic)
//   alpha         power-law exponent                         [1.5]
//   seed          generator / random-ordering seed           [1]
//   ordering      none | random | out_degree | in_degree     [random]
//   path          edge-list file                             (required for edge_list)
//   n_limit       keep the first n_limit nodes               (required for edge_list)
//   damping       PageRank damping factor d                  [0.85]
//   target_error  global L1 stop threshold                   [1/N]
//   variants      subset of unif_static,unif_dynamic,cb_static,cb_dynamic [all]
//   gamma [1.2]  eta [0.5]  z [10]  pid_speed [N/K]  delay [0]
//   weight_scheme greedy | inv_out | inv_out_in              [inv_out]
//   max_steps     [1000000]
//   initial_sizes comma-separated starting set sizes; replaces the variant's
//                 starting partition (every k_list entry must match its length)
//   write_traces  true | false                               [true]
//   out_dir       output directory                           [$DITER_OUT_DIR or ./out]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "diter/graph.hpp"
#include "diter/metrics.hpp"
#include "diter/simulator.hpp"

namespace diter {

class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Variant {
  PartitionScheme partition = PartitionScheme::uniform;
  bool dynamic = false;

  std::string name() const {
    return std::string(partition == PartitionScheme::uniform ? "unif" : "cb") + (dynamic ? "_dynamic" : "_static");
  }
  friend bool operator==(const Variant&, const Variant&) = default;
};

inline std::vector<Variant> all_variants() {
  return {{PartitionScheme::uniform, false},
          {PartitionScheme::uniform, true},
          {PartitionScheme::cb, false},
          {PartitionScheme::cb, true}};
}

struct ExperimentSpec {
  enum class Source { synthetic, edge_list };
  Source source = Source::synthetic;
  std::size_t n = 0;
  double alpha = 1.5;
  std::uint64_t seed = 1;
  NodeOrdering::Kind ordering = NodeOrdering::Kind::random;
  std::string path;
  long long n_limit = 0;

  double damping = 0.85;
  std::optional<double> target_error;  // unset: 1/N
  std::vector<std::size_t> k_list;
  std::vector<Variant> variants = all_variants();
  double gamma = 1.2;
  double eta = 0.5;
  std::size_t z = 10;
  std::size_t pid_speed = 0;
  std::size_t delay = 0;
  WeightScheme weight_scheme = WeightScheme::inv_out;
  std::size_t max_steps = 1'000'000;
  std::vector<std::size_t> initial_sizes;
  bool write_traces = true;
  std::string out_dir;

  std::size_t node_count() const {
    return source == Source::synthetic ? n : static_cast<std::size_t>(n_limit);
  }
  double target_for(std::size_t nodes) const {
    return target_error ? *target_error : 1.0 / static_cast<double>(nodes);
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto t = std::string(trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <typename T>
T parse_value(const std::string& key, const std::string& value) {
  T out{};
  if (!parse_number(std::string_view(value), out))
    throw config_error("invalid value for " + key + ": '" + value + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw config_error("invalid value for " + key + ": '" + v + "'");
}

}  // namespace detail

inline ExperimentSpec parse_config(std::istream& in) {
  static const std::set<std::string> known = {
      "source", "k_list", "n", "alpha", "seed", "ordering", "path", "n_limit", "damping", "target_error",
      "variants", "gamma", "eta", "z", "pid_speed", "delay", "weight_scheme", "max_steps", "write_traces",
      "out_dir", "initial_sizes"};

  std::map<std::string, std::string> kv;
  std::vector<std::string> unknown;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw parse_error("expected key=value", lineno);
    const auto key = std::string(detail::trim(t.substr(0, eq)));
    const auto value = std::string(detail::trim(t.substr(eq + 1)));
    if (!known.contains(key)) {
      unknown.push_back(key);
      continue;
    }
    kv[key] = value;
  }
  if (!unknown.empty()) {
    std::string msg = "unknown key";
    msg += unknown.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", " : "") + unknown[i];
    throw config_error(msg);
  }

  std::vector<std::string> missing;
  for (const char* req : {"source", "k_list"})
    if (!kv.contains(req)) missing.push_back(req);
  if (!missing.empty()) {
    std::string msg = "missing required key";
    msg += missing.size() > 1 ? "s: " : ": ";
    for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? ", " : "") + missing[i];
    throw config_error(msg);
  }

  ExperimentSpec spec;
  using detail::parse_value;
  const auto& src = kv["source"];
  if (src == "synthetic") {
    spec.source = ExperimentSpec::Source::synthetic;
    if (!kv.contains("n")) throw config_error("missing required key: n (synthetic source)");
    spec.n = parse_value<std::size_t>("n", kv["n"]);
  } else if (src == "edge_list") {
    spec.source = ExperimentSpec::Source::edge_list;
    if (!kv.contains("path")) throw config_error("missing required key: path (edge_list source)");
    if (!kv.contains("n_limit")) throw config_error("missing required key: n_limit (edge_list source)");
    spec.path = kv["path"];
    spec.n_limit = parse_value<long long>("n_limit", kv["n_limit"]);
    if (spec.n_limit <= 0) throw config_error("n_limit must be positive");
  } else {
    throw config_error("invalid value for source: '" + src + "'");
  }

  for (const auto& item : detail::split_list(kv["k_list"])) spec.k_list.push_back(parse_value<std::size_t>("k_list", item));
  if (spec.k_list.empty()) throw config_error("k_list must not be empty");
  for (const auto k : spec.k_list) {
    if (k == 0 || k > spec.node_count())
      throw config_error("k_list entry " + std::to_string(k) + " outside [1, " + std::to_string(spec.node_count()) + "]");
  }

  if (kv.contains("alpha")) spec.alpha = parse_value<double>("alpha", kv["alpha"]);
  if (kv.contains("seed")) spec.seed = parse_value<std::uint64_t>("seed", kv["seed"]);
  if (kv.contains("ordering")) {
    const auto& o = kv["ordering"];
    if (o == "none") spec.ordering = NodeOrdering::Kind::identity;
    else if (o == "random") spec.ordering = NodeOrdering::Kind::random;
    else if (o == "out_degree") spec.ordering = NodeOrdering::Kind::by_out_degree_desc;
    else if (o == "in_degree") spec.ordering = NodeOrdering::Kind::by_in_degree_desc;
    else throw config_error("invalid value for ordering: '" + o + "'");
  }
  if (kv.contains("damping")) spec.damping = parse_value<double>("damping", kv["damping"]);
  if (kv.contains("target_error")) spec.target_error = parse_value<double>("target_error", kv["target_error"]);
  if (kv.contains("variants")) {
    spec.variants.clear();
    for (const auto& name : detail::split_list(kv["variants"])) {
      bool found = false;
      for (const auto& v : all_variants()) {
        if (v.name() == name) {
          spec.variants.push_back(v);
          found = true;
        }
      }
      if (!found) throw config_error("invalid variant: '" + name + "'");
    }
    if (spec.variants.empty()) throw config_error("variants must not be empty");
  }
  if (kv.contains("gamma")) spec.gamma = parse_value<double>("gamma", kv["gamma"]);
  if (kv.contains("eta")) spec.eta = parse_value<double>("eta", kv["eta"]);
  if (kv.contains("z")) spec.z = parse_value<std::size_t>("z", kv["z"]);
  if (kv.contains("pid_speed")) spec.pid_speed = parse_value<std::size_t>("pid_speed", kv["pid_speed"]);
  if (kv.contains("delay")) spec.delay = parse_value<std::size_t>("delay", kv["delay"]);
  if (kv.contains("max_steps")) spec.max_steps = parse_value<std::size_t>("max_steps", kv["max_steps"]);
  if (kv.contains("write_traces")) spec.write_traces = detail::parse_bool("write_traces", kv["write_traces"]);
  if (kv.contains("weight_scheme")) {
    const auto& w = kv["weight_scheme"];
    if (w == "greedy") spec.weight_scheme = WeightScheme::greedy;
    else if (w == "inv_out") spec.weight_scheme = WeightScheme::inv_out;
    else if (w == "inv_out_in") spec.weight_scheme = WeightScheme::inv_out_in;
    else throw config_error("invalid value for weight_scheme: '" + w + "'");
  }
  if (kv.contains("out_dir")) spec.out_dir = kv["out_dir"];
  if (kv.contains("initial_sizes")) {
    std::size_t total = 0;
    for (const auto& item : detail::split_list(kv["initial_sizes"])) {
      const auto v = parse_value<std::size_t>("initial_sizes", item);
      if (v == 0) throw config_error("initial_sizes entries must be positive");
      spec.initial_sizes.push_back(v);
      total += v;
    }
    if (total != spec.node_count()) throw config_error("initial_sizes must sum to the node count");
    for (const auto k : spec.k_list)
      if (k != spec.initial_sizes.size()) throw config_error("k_list entries must equal the number of initial_sizes");
  }

  if (!(spec.gamma > 1.0)) throw config_error("gamma must be > 1");
  if (!(spec.eta > 0.0 && spec.eta <= 1.0)) throw config_error("eta must lie in (0, 1]");
  if (!(spec.damping > 0.0 && spec.damping < 1.0)) throw config_error("damping must lie in (0, 1)");
  if (spec.target_error && !(*spec.target_error > 0.0)) throw config_error("target_error must be positive");
  if (spec.source == ExperimentSpec::Source::synthetic) {
    if (spec.n < 2) throw config_error("n must be at least 2");
    if (!(spec.alpha > 1.0)) throw config_error("alpha must be > 1");
  }
  return spec;
}

inline ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config: " + path);
  return parse_config(in);
}

// The graph named by the spec, reordered as requested.
inline ColumnGraph load_graph(const ExperimentSpec& spec) {
  if (spec.source == ExperimentSpec::Source::edge_list) return load_edge_list(spec.path, spec.n_limit);
  auto g = synth_power_law(spec.n, spec.alpha, spec.seed);
  if (spec.ordering == NodeOrdering::Kind::identity) return g;
  return reorder_nodes(g, NodeOrdering{spec.ordering, spec.seed});
}

inline SimConfig sim_config(const ExperimentSpec& spec, std::size_t k, const Variant& v, std::size_t nodes) {
  SimConfig cfg;
  cfg.k = k;
  cfg.pid_speed = spec.pid_speed;
  cfg.target_error = spec.target_for(nodes);
  cfg.gamma = spec.gamma;
  cfg.eta = spec.eta;
  cfg.z = spec.z;
  cfg.weight_scheme = spec.weight_scheme;
  cfg.partition = v.partition;
  cfg.dynamic = v.dynamic;
  cfg.max_steps = spec.max_steps;
  cfg.delay = spec.delay;
  cfg.seed = spec.seed;
  cfg.record_trace = spec.write_traces;
  cfg.initial_sizes = spec.initial_sizes;
  return cfg;
}

struct ExperimentRow {
  std::size_t k = 0;
  Variant variant;
  bool converged = false;
  double slowest_pid_time = 0.0;
  double idle_proportion = 0.0;
  std::size_t steps = 0;
};

struct ExperimentResult {
  GraphStats graph;
  std::vector<ExperimentRow> rows;
  bool all_converged = true;
};

inline constexpr const char* experiment_summary_header = "k,variant,slowest_pid_time,idle_proportion,steps";

inline void write_experiment_summary(std::ostream& out, const ExperimentResult& res) {
  out << experiment_summary_header << '\n';
  for (const auto& row : res.rows) {
    out << row.k << ',' << row.variant.name() << ','
        << (row.converged ? format_double(row.slowest_pid_time) : std::string("nan")) << ','
        << (row.converged ? format_double(row.idle_proportion) : std::string("nan")) << ',' << row.steps << '\n';
  }
}

// Runs every (k, variant) cell in grid order. A cell that fails to converge
// is reported and the sweep continues. Writes summary.csv, graph.csv and,
// unless disabled, per-cell trace/summary/convergence/partition files under runs/.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                       std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const auto graph = load_graph(spec);
  const auto sys = build_pagerank_system(graph, spec.damping);
  for (const auto k : spec.k_list)
    if (k == 0 || k > graph.n()) throw config_error("k = " + std::to_string(k) + " exceeds node count");

  ExperimentResult res;
  res.graph = stats(graph);
  fs::create_directories(out_dir);
  if (spec.write_traces) fs::create_directories(fs::path(out_dir) / "runs");

  for (const auto k : spec.k_list) {
    for (const auto& v : spec.variants) {
      ExperimentRow row{k, v};
      Trace trace;
      try {
        trace = run(sys, sim_config(spec, k, v, graph.n())).trace;
      } catch (const non_convergence_error& e) {
        trace = e.trace();
        if (log) *log << "k=" << k << " " << v.name() << ": " << e.what() << '\n';
      }
      row.converged = trace.converged && res.graph.l > 0;
      row.steps = trace.steps;
      if (row.converged) {
        row.slowest_pid_time = slowest_pid_time(trace);
        row.idle_proportion = idle_proportion(trace);
      }
      res.all_converged = res.all_converged && row.converged;
      if (spec.write_traces) {
        const auto stem = (fs::path(out_dir) / "runs" / ("k" + std::to_string(k) + "_" + v.name())).string();
        write_csv(trace, {stem + "_trace.csv", stem + "_summary.csv", stem + "_convergence.csv"});
        detail::write_file(stem + "_partition.csv", [&](std::ostream& o) { write_partition_csv(o, trace); });
      }
      if (log) {
        *log << "k=" << k << " " << v.name() << " time=" << format_double(row.slowest_pid_time)
             << " idle=" << format_double(row.idle_proportion) << " steps=" << row.steps << '\n';
      }
      res.rows.push_back(row);
    }
  }

  detail::write_file((fs::path(out_dir) / "summary.csv").string(),
                     [&](std::ostream& o) { write_experiment_summary(o, res); });
  detail::write_file((fs::path(out_dir) / "graph.csv").string(), [&](std::ostream& o) {
    o << stats_csv_header() << '\n' << stats_csv_row(res.graph) << '\n';
  });
  return res;
}

}  // namespace diter

#pragma once

// Sparse column-major matrices/graphs and PageRank-type systems built on them.
//
// Column i of the matrix holds the out-links of node i: an entry (j, p(j,i))
// for every link i -> j. Diffusing node i walks exactly that column.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "diter/rng.hpp"
#include "diter/types.hpp"

namespace diter {

using edge_t = std::pair<node_t, node_t>;  // (src, dst)

class ColumnGraph {
public:
  ColumnGraph() : col_ptr_(1, 0) {}

  // Builds the structure from (src, dst) pairs. Duplicate pairs are collapsed,
  // every weight is set to 1.
  static ColumnGraph from_edges(std::size_t n, std::vector<edge_t> edges) {
    for (const auto& [src, dst] : edges) {
      if (src >= n || dst >= n) throw std::invalid_argument("edge endpoint out of range");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    ColumnGraph g;
    g.n_ = n;
    g.col_ptr_.assign(n + 1, 0);
    g.rows_.reserve(edges.size());
    for (const auto& [src, dst] : edges) {
      ++g.col_ptr_[src + 1];
      g.rows_.push_back(dst);
    }
    std::partial_sum(g.col_ptr_.begin(), g.col_ptr_.end(), g.col_ptr_.begin());
    g.weights_.assign(edges.size(), 1.0);
    g.in_deg_.assign(n, 0);
    for (const node_t j : g.rows_) ++g.in_deg_[j];
    return g;
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t links() const noexcept { return rows_.size(); }

  std::span<const node_t> rows(node_t i) const noexcept {
    return {rows_.data() + col_ptr_[i], col_ptr_[i + 1] - col_ptr_[i]};
  }
  std::span<const double> weights(node_t i) const noexcept {
    return {weights_.data() + col_ptr_[i], col_ptr_[i + 1] - col_ptr_[i]};
  }

  std::size_t out_degree(node_t i) const noexcept { return col_ptr_[i + 1] - col_ptr_[i]; }
  std::size_t in_degree(node_t j) const noexcept { return in_deg_[j]; }

  std::vector<std::size_t> out_degrees() const {
    std::vector<std::size_t> out(n_);
    for (node_t i = 0; i < n_; ++i) out[i] = out_degree(i);
    return out;
  }
  const std::vector<std::size_t>& in_degrees() const noexcept { return in_deg_; }

  // Same structure, new entry values (one per stored link, in storage order).
  ColumnGraph with_weights(std::vector<double> weights) const {
    if (weights.size() != rows_.size()) throw std::invalid_argument("weight count mismatch");
    ColumnGraph g = *this;
    g.weights_ = std::move(weights);
    return g;
  }

  std::vector<edge_t> edges() const {
    std::vector<edge_t> out;
    out.reserve(links());
    for (node_t i = 0; i < n_; ++i)
      for (const node_t j : rows(i)) out.emplace_back(i, j);
    return out;
  }

  friend bool operator==(const ColumnGraph&, const ColumnGraph&) = default;

private:
  std::size_t n_ = 0;
  std::vector<std::size_t> col_ptr_;
  std::vector<node_t> rows_;
  std::vector<double> weights_;
  std::vector<std::size_t> in_deg_;
};

// X = P.X + B with contraction margin epsilon.
struct LinearSystem {
  ColumnGraph graph;
  std::vector<double> b;
  double epsilon = 1.0;

  std::size_t n() const noexcept { return graph.n(); }
};

struct GraphStats {
  std::size_t n = 0;
  std::size_t l = 0;
  std::size_t dangling = 0;
  double avg_deg = 0.0;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

inline GraphStats stats(const ColumnGraph& g) {
  GraphStats s;
  s.n = g.n();
  s.l = g.links();
  for (node_t i = 0; i < g.n(); ++i)
    if (g.out_degree(i) == 0) ++s.dangling;
  s.avg_deg = s.n == 0 ? 0.0 : static_cast<double>(s.l) / static_cast<double>(s.n);
  return s;
}

inline std::string stats_csv_header() { return "n,l,avg_deg,dangling"; }

inline std::string stats_csv_row(const GraphStats& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%zu", s.n, s.l, s.avg_deg, s.dangling);
  return buf;
}

// ---------------------------------------------------------------------------
// Edge-list files: one "src dst" pair per line, 0-based, '#' comments.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool next_token(std::string_view& s, std::string_view& tok) {
  s = trim(s);
  if (s.empty()) return false;
  const auto end = s.find_first_of(" \t");
  tok = s.substr(0, end);
  s = end == std::string_view::npos ? std::string_view{} : s.substr(end);
  return true;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace detail

inline ColumnGraph read_edge_list(std::istream& in, long long n_limit) {
  if (n_limit <= 0) throw std::invalid_argument("n_limit must be positive");
  const auto limit = static_cast<unsigned long long>(n_limit);
  std::vector<edge_t> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest = detail::trim(line);
    if (rest.empty() || rest.front() == '#') continue;
    std::string_view a, b, extra;
    unsigned long long src = 0, dst = 0;
    if (!detail::next_token(rest, a) || !detail::next_token(rest, b) ||
        detail::next_token(rest, extra) || !detail::parse_number(a, src) ||
        !detail::parse_number(b, dst)) {
      throw parse_error("malformed edge line '" + line + "'", lineno);
    }
    if (src < limit && dst < limit)
      edges.emplace_back(static_cast<node_t>(src), static_cast<node_t>(dst));
  }
  return ColumnGraph::from_edges(static_cast<std::size_t>(limit), std::move(edges));
}

inline ColumnGraph load_edge_list(const std::string& path, long long n_limit) {
  if (n_limit <= 0) throw std::invalid_argument("n_limit must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list: " + path);
  return read_edge_list(in, n_limit);
}

inline void write_edge_list(std::ostream& out, const ColumnGraph& g) {
  for (const auto& [src, dst] : g.edges()) out << src << ' ' << dst << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic power-law graphs.

// Inverse-CDF sampler for Pr(k) proportional to 1/k^alpha on {1, ..., kmax}.
class PowerLawDegrees {
public:
  PowerLawDegrees(std::size_t kmax, double alpha) : cdf_(kmax) {
    double sum = 0.0;
    for (std::size_t k = 1; k <= kmax; ++k) {
      sum += std::pow(static_cast<double>(k), -alpha);
      cdf_[k - 1] = sum;
    }
    for (double& c : cdf_) c /= sum;
    cdf_.back() = 1.0;
  }

  std::size_t operator()(rng::engine& gen) const {
    const double u = rng::unit(gen);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::size_t>(it - cdf_.begin()) + 1;
  }

private:
  std::vector<double> cdf_;
};

// Out- and in-degrees drawn i.i.d. from the power law, stubs matched by a
// seeded shuffle. The two stub totals generally differ; pairing stops at the
// shorter list. Self-loops and repeated pairs are dropped.
inline ColumnGraph synth_power_law(std::size_t n, double alpha, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("synth_power_law: n must be at least 2");
  if (!(alpha > 1.0)) throw std::invalid_argument("synth_power_law: alpha must be > 1");

  rng::engine gen(seed);
  const PowerLawDegrees degrees(n - 1, alpha);
  std::vector<node_t> out_stubs, in_stubs;
  for (node_t i = 0; i < n; ++i) out_stubs.insert(out_stubs.end(), degrees(gen), i);
  for (node_t i = 0; i < n; ++i) in_stubs.insert(in_stubs.end(), degrees(gen), i);
  rng::shuffle(std::span{out_stubs}, gen);
  rng::shuffle(std::span{in_stubs}, gen);

  const std::size_t m = std::min(out_stubs.size(), in_stubs.size());
  std::vector<edge_t> edges;
  edges.reserve(m);
  for (std::size_t s = 0; s < m; ++s)
    if (out_stubs[s] != in_stubs[s]) edges.emplace_back(out_stubs[s], in_stubs[s]);
  return ColumnGraph::from_edges(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Node reordering.

struct NodeOrdering {
  enum class Kind { identity, random, by_out_degree_desc, by_in_degree_desc };
  Kind kind = Kind::identity;
  std::uint64_t seed = 0;

  static NodeOrdering identity() { return {Kind::identity, 0}; }
  static NodeOrdering random(std::uint64_t seed) { return {Kind::random, seed}; }
  static NodeOrdering by_out_degree_desc() { return {Kind::by_out_degree_desc, 0}; }
  static NodeOrdering by_in_degree_desc() { return {Kind::by_in_degree_desc, 0}; }
};

// Returns perm with perm[old] = new.
inline std::vector<node_t> ordering_permutation(const ColumnGraph& g, const NodeOrdering& ord) {
  const std::size_t n = g.n();
  std::vector<node_t> by_rank(n);  // by_rank[new] = old
  std::iota(by_rank.begin(), by_rank.end(), node_t{0});
  switch (ord.kind) {
    case NodeOrdering::Kind::identity:
      break;
    case NodeOrdering::Kind::random: {
      rng::engine gen(ord.seed);
      rng::shuffle(std::span{by_rank}, gen);
      break;
    }
    case NodeOrdering::Kind::by_out_degree_desc:
      std::stable_sort(by_rank.begin(), by_rank.end(),
                       [&](node_t a, node_t b) { return g.out_degree(a) > g.out_degree(b); });
      break;
    case NodeOrdering::Kind::by_in_degree_desc:
      std::stable_sort(by_rank.begin(), by_rank.end(),
                       [&](node_t a, node_t b) { return g.in_degree(a) > g.in_degree(b); });
      break;
  }
  std::vector<node_t> perm(n);
  for (node_t rank = 0; rank < n; ++rank) perm[by_rank[rank]] = rank;
  return perm;
}

inline std::vector<node_t> invert_permutation(std::span<const node_t> perm) {
  std::vector<node_t> inv(perm.size());
  for (node_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

// Relabels every node i as perm[i]. Entry values follow their links.
inline ColumnGraph permute(const ColumnGraph& g, std::span<const node_t> perm) {
  if (perm.size() != g.n()) throw std::invalid_argument("permutation size mismatch");
  struct Entry {
    node_t src, dst;
    double w;
  };
  std::vector<Entry> entries;
  entries.reserve(g.links());
  for (node_t i = 0; i < g.n(); ++i) {
    const auto rows = g.rows(i);
    const auto ws = g.weights(i);
    for (std::size_t e = 0; e < rows.size(); ++e) entries.push_back({perm[i], perm[rows[e]], ws[e]});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return std::pair{a.src, a.dst} < std::pair{b.src, b.dst}; });
  std::vector<edge_t> edges;
  std::vector<double> weights;
  edges.reserve(entries.size());
  weights.reserve(entries.size());
  for (const auto& e : entries) {
    edges.emplace_back(e.src, e.dst);
    weights.push_back(e.w);
  }
  return ColumnGraph::from_edges(g.n(), std::move(edges)).with_weights(std::move(weights));
}

inline ColumnGraph reorder_nodes(const ColumnGraph& g, const NodeOrdering& ord) {
  return permute(g, ordering_permutation(g, ord));
}

// ---------------------------------------------------------------------------

// p(j,i) = d/#out_i, dangling columns stay empty, b_i = (1-d)/N.
inline LinearSystem build_pagerank_system(const ColumnGraph& g, double damping) {
  if (!(damping > 0.0 && damping < 1.0)) throw std::invalid_argument("damping must lie in (0, 1)");
  std::vector<double> weights;
  weights.reserve(g.links());
  for (node_t i = 0; i < g.n(); ++i) {
    const double w = damping / static_cast<double>(g.out_degree(i));
    weights.insert(weights.end(), g.out_degree(i), w);
  }
  LinearSystem sys;
  sys.graph = g.with_weights(std::move(weights));
  sys.b.assign(g.n(), g.n() == 0 ? 0.0 : (1.0 - damping) / static_cast<double>(g.n()));
  sys.epsilon = 1.0 - damping;
  return sys;
}

// y = P.x
inline std::vector<double> multiply(const ColumnGraph& p, std::span<const double> x) {
  std::vector<double> y(p.n(), 0.0);
  for (node_t i = 0; i < p.n(); ++i) {
    if (x[i] == 0.0) continue;
    const auto rows = p.rows(i);
    const auto ws = p.weights(i);
    for (std::size_t e = 0; e < rows.size(); ++e) y[rows[e]] += ws[e] * x[i];
  }
  return y;
}

}  // namespace diter

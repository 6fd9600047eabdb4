#pragma once

// Sequential D-iteration: residual fluid F, diffused history H, node selection
// by cyclic threshold scan, and the single-machine solver loop.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "diter/graph.hpp"
#include "diter/types.hpp"

namespace diter {

struct FluidState {
  std::vector<double> f;
  std::vector<double> h;
  double r = 0.0;  // cached |f|_1

  void recompute_residual() {
    double s = 0.0;
    for (const double v : f) s += std::abs(v);
    r = s;
  }
};

inline FluidState init_state(const LinearSystem& sys) {
  FluidState st;
  st.f = sys.b;
  st.h.assign(sys.n(), 0.0);
  st.recompute_residual();
  return st;
}

struct DiffusionReceipt {
  node_t node = 0;
  double sent = 0.0;
  op_count local_ops = 0;
};

// Moves f_i into h_i and pushes sent * p(j,i) to every child j.
inline DiffusionReceipt diffuse(FluidState& st, const LinearSystem& sys, node_t i) {
  const double sent = st.f[i];
  st.h[i] += sent;
  st.f[i] = 0.0;
  st.r -= std::abs(sent);
  const auto rows = sys.graph.rows(i);
  const auto ws = sys.graph.weights(i);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    double& fj = st.f[rows[e]];
    const double before = std::abs(fj);
    fj += sent * ws[e];
    st.r += std::abs(fj) - before;
  }
  return {i, sent, rows.size()};
}

// Local variant: children outside `members` are not touched; their share is
// handed to `external(j, amount)` for the caller to buffer.
template <typename ExternalSink>
DiffusionReceipt diffuse(FluidState& st, const LinearSystem& sys, node_t i,
                         std::span<const char> members, ExternalSink&& external) {
  const double sent = st.f[i];
  st.h[i] += sent;
  st.f[i] = 0.0;
  st.r -= std::abs(sent);
  const auto rows = sys.graph.rows(i);
  const auto ws = sys.graph.weights(i);
  op_count local = 0;
  for (std::size_t e = 0; e < rows.size(); ++e) {
    const node_t j = rows[e];
    if (members[j]) {
      double& fj = st.f[j];
      const double before = std::abs(fj);
      fj += sent * ws[e];
      st.r += std::abs(fj) - before;
      ++local;
    } else {
      external(j, sent * ws[e]);
    }
  }
  return {i, sent, local};
}

// ---------------------------------------------------------------------------
// Node selection.

enum class WeightScheme { greedy, inv_out, inv_out_in };

// w_i = 1, 1/#out_i or 1/(#out_i * #in_i); a zero denominator falls back to 1.
inline std::vector<double> node_weights(const ColumnGraph& g, WeightScheme scheme) {
  std::vector<double> w(g.n(), 1.0);
  for (node_t i = 0; i < g.n(); ++i) {
    const auto out = g.out_degree(i);
    const auto in = g.in_degree(i);
    switch (scheme) {
      case WeightScheme::greedy:
        break;
      case WeightScheme::inv_out:
        if (out > 0) w[i] = 1.0 / static_cast<double>(out);
        break;
      case WeightScheme::inv_out_in:
        if (out > 0 && in > 0) w[i] = 1.0 / (static_cast<double>(out) * static_cast<double>(in));
        break;
    }
  }
  return w;
}

struct SelectorState {
  double threshold = 1.0;
  std::size_t cursor = 0;
  double gamma = 1.2;
  std::size_t decays = 0;  // number of threshold divisions so far
};

// max|f| * max w * gamma over the given positions; strictly above every
// initial weighted fluid.
inline double initial_threshold(std::span<const double> fluid, std::span<const node_t> nodes,
                                std::span<const double> weights, double gamma) {
  double fmax = 0.0, wmax = 0.0;
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    fmax = std::max(fmax, std::abs(fluid[p]));
    wmax = std::max(wmax, weights[nodes[p]]);
  }
  if (wmax == 0.0) wmax = 1.0;
  return fmax > 0.0 ? fmax * wmax * gamma : wmax * gamma;
}

inline SelectorState make_selector(std::span<const double> fluid, std::span<const node_t> nodes,
                                   std::span<const double> weights, double gamma) {
  if (!(gamma > 1.0)) throw std::invalid_argument("gamma must be > 1");
  return {initial_threshold(fluid, nodes, weights, gamma), 0, gamma, 0};
}

// Cyclic scan from the cursor for the first position p with
// |fluid[p]| * w[nodes[p]] > threshold. A fruitless full cycle divides the
// threshold by gamma and scans again. Returns nullopt once every weighted
// fluid is zero.
inline std::optional<std::size_t> select_next(SelectorState& sel, std::span<const double> fluid,
                                              std::span<const node_t> nodes,
                                              std::span<const double> weights) {
  const std::size_t n = nodes.size();
  if (n == 0) return std::nullopt;
  if (sel.cursor >= n) sel.cursor = 0;
  for (;;) {
    double best = 0.0;
    std::size_t pos = sel.cursor;
    for (std::size_t step = 0; step < n; ++step) {
      const double v = std::abs(fluid[pos]) * weights[nodes[pos]];
      if (v > sel.threshold) {
        sel.cursor = pos + 1 == n ? 0 : pos + 1;
        return pos;
      }
      best = std::max(best, v);
      if (++pos == n) pos = 0;
    }
    if (best == 0.0) return std::nullopt;
    // Further fruitless cycles would see the same fluids, so decay straight
    // to the first threshold below the maximum.
    while (!(best > sel.threshold)) {
      sel.threshold /= sel.gamma;
      ++sel.decays;
    }
  }
}

// ---------------------------------------------------------------------------
// Solver.

struct SolverOptions {
  WeightScheme scheme = WeightScheme::inv_out;
  double gamma = 1.2;
  op_count max_ops = 0;  // 0: 10^4 * L
};

struct SequentialResult {
  FluidState state;
  op_count ops = 0;
  std::size_t diffusions = 0;
};

inline double error_bound(double r_total, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  return r_total / epsilon;
}

inline SequentialResult solve_sequential(const LinearSystem& sys, double target_error,
                                         const SolverOptions& opt = {}) {
  if (!(target_error > 0.0)) throw std::invalid_argument("target_error must be positive");
  const std::size_t n = sys.n();
  const auto weights = node_weights(sys.graph, opt.scheme);
  std::vector<node_t> nodes(n);
  for (node_t i = 0; i < n; ++i) nodes[i] = i;

  SequentialResult res{init_state(sys), 0, 0};
  auto& st = res.state;
  auto sel = make_selector(st.f, nodes, weights, opt.gamma);
  const op_count cap =
      opt.max_ops ? opt.max_ops : op_count{10000} * std::max<op_count>(1, sys.graph.links());

  while (st.r > target_error) {
    const auto pick = select_next(sel, st.f, nodes, weights);
    if (!pick) break;
    res.ops += diffuse(st, sys, static_cast<node_t>(*pick)).local_ops;
    if (++res.diffusions % std::max<std::size_t>(n, 1) == 0) st.recompute_residual();
    if (res.ops > cap) {
      throw divergence_error("sequential solver exceeded its operation budget, r = " +
                                 std::to_string(st.r),
                             st.r);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Solution export.

inline void write_solution_csv(std::ostream& out, std::span<const double> h) {
  out << "node,h\n";
  char buf[64];
  for (std::size_t i = 0; i < h.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, h[i]);
    out << buf;
  }
}

// Raw little-endian binary64 values, no header.
inline void write_vector_binary(std::ostream& out, std::span<const double> v) {
  for (const double x : v) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

inline std::vector<double> read_vector_binary(std::istream& in) {
  std::vector<double> v;
  unsigned char bytes[8];
  while (in.read(reinterpret_cast<char*>(bytes), 8)) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[b]} << (8 * b);
    v.push_back(std::bit_cast<double>(bits));
  }
  if (in.gcount() != 0) throw std::runtime_error("truncated binary vector");
  return v;
}

}  // namespace diter

#pragma once

// Node-to-PID assignment: static constructors and the slope-driven
// repartition controller.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "diter/types.hpp"

namespace diter {

struct PartitionAssignment {
  std::size_t k = 0;
  std::vector<std::uint32_t> owner;        // node -> PID
  std::vector<std::size_t> position;       // node -> index inside sets[owner]
  std::vector<std::vector<node_t>> sets;   // PID -> ordered node list

  std::size_t n() const noexcept { return owner.size(); }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(k);
    for (std::size_t p = 0; p < k; ++p) s[p] = sets[p].size();
    return s;
  }
};

// Contiguous blocks with the given sizes, in order.
inline PartitionAssignment partition_from_sizes(std::span<const std::size_t> sizes) {
  PartitionAssignment a;
  a.k = sizes.size();
  a.sets.resize(a.k);
  node_t next = 0;
  for (std::size_t p = 0; p < a.k; ++p) {
    for (std::size_t c = 0; c < sizes[p]; ++c) {
      a.owner.push_back(static_cast<std::uint32_t>(p));
      a.position.push_back(c);
      a.sets[p].push_back(next++);
    }
  }
  return a;
}

// Disjoint cover of {0..n-1} with owner/position consistent with sets.
inline bool is_valid(const PartitionAssignment& a) {
  if (a.sets.size() != a.k || a.position.size() != a.owner.size()) return false;
  std::vector<char> seen(a.n(), 0);
  std::size_t total = 0;
  for (std::size_t p = 0; p < a.k; ++p) {
    for (std::size_t idx = 0; idx < a.sets[p].size(); ++idx) {
      const node_t v = a.sets[p][idx];
      if (v >= a.n() || seen[v] || a.owner[v] != p || a.position[v] != idx) return false;
      seen[v] = 1;
      ++total;
    }
  }
  return total == a.n();
}

// Blocks of size ceil(n/k) for the first n mod k sets, floor(n/k) after.
inline PartitionAssignment uniform_partition(std::size_t n, std::size_t k) {
  if (k == 0 || k > n) throw std::invalid_argument("uniform_partition: need 1 <= k <= n");
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t p = 0; p < n % k; ++p) ++sizes[p];
  return partition_from_sizes(sizes);
}

// Cost Balanced: each block grows while its out-degree sum is below L/K.
// Every block keeps at least one node; when the greedy fill would starve the
// remaining blocks, the tail is shared out one node per block.
inline PartitionAssignment cb_partition(std::span<const std::size_t> out_deg, std::size_t k) {
  const std::size_t n = out_deg.size();
  if (k == 0 || k > n) throw std::invalid_argument("cb_partition: need 1 <= k <= n");
  const double total = static_cast<double>(std::accumulate(out_deg.begin(), out_deg.end(), std::size_t{0}));
  const double target = total / static_cast<double>(k);

  std::vector<std::size_t> sizes(k, 0);
  std::size_t next = 0;
  for (std::size_t p = 0; p + 1 < k; ++p) {
    const std::size_t reserve = k - 1 - p;  // one node for each later block
    double sum = 0.0;
    do {
      sum += static_cast<double>(out_deg[next++]);
      ++sizes[p];
    } while (sum < target && n - next > reserve);
  }
  sizes[k - 1] = n - next;
  return partition_from_sizes(sizes);
}

// ---------------------------------------------------------------------------
// Dynamic repartition controller.

struct SlopeTracker {
  std::vector<double> slope;
  double eta = 0.5;
  double eps_floor = 0.0;
  std::vector<std::size_t> cooldown;
  std::size_t z = 10;
};

inline SlopeTracker make_slope_tracker(std::size_t k, double eta, double target_error, std::size_t z) {
  if (k == 0) throw std::invalid_argument("slope tracker needs k >= 1");
  SlopeTracker t;
  t.slope.assign(k, 0.0);
  t.eta = eta;
  t.eps_floor = target_error / static_cast<double>(k) / 1000.0;
  t.cooldown.assign(k, 0);
  t.z = z;
  return t;
}

// Exponential moving average of -log10(r + s + eps_floor).
inline double update_slope(SlopeTracker& t, std::size_t pid, double r, double s) {
  double& v = t.slope[pid];
  v = v * (1.0 - t.eta) - std::log10(r + s + t.eps_floor) * t.eta;
  return v;
}

// One time step elapsed.
inline void tick(SlopeTracker& t) {
  for (auto& c : t.cooldown)
    if (c > 0) --c;
}

struct MovePlan {
  std::size_t from_pid = 0;
  std::size_t to_pid = 0;
  std::size_t count = 0;

  friend bool operator==(const MovePlan&, const MovePlan&) = default;
};

// Moves from the slowest PID (lowest slope) to the fastest when their r+s
// differ by more than a factor two. Commits the cooldown of both ends.
inline std::optional<MovePlan> plan_reaffectation(SlopeTracker& t, std::span<const std::size_t> sizes) {
  const std::size_t k = t.slope.size();
  if (k < 2) return std::nullopt;
  std::size_t i_min = 0, i_max = 0;
  for (std::size_t p = 1; p < k; ++p) {
    if (t.slope[p] < t.slope[i_min]) i_min = p;
    if (t.slope[p] > t.slope[i_max]) i_max = p;
  }
  const double s_min = t.slope[i_min];
  const double s_max = t.slope[i_max];
  if (i_min == i_max || t.cooldown[i_min] > 0 || t.cooldown[i_max] > 0) return std::nullopt;
  if (!(s_min < s_max + std::log10(0.5))) return std::nullopt;

  const std::size_t size = sizes[i_min];
  if (size < 2) return std::nullopt;
  double ratio = (s_min + 1.0) / (s_max + 1.0);
  if (!(ratio >= 0.0)) ratio = 0.0;  // negative or NaN
  ratio = std::min(ratio, 0.1);
  auto count = static_cast<std::size_t>(std::floor(static_cast<double>(size) * ratio));
  count = std::clamp<std::size_t>(count, 1, size - 1);

  t.cooldown[i_min] = t.z;
  t.cooldown[i_max] = t.z;
  return MovePlan{i_min, i_max, count};
}

// Moves the last `count` nodes of sets[from] to the end of sets[to].
inline std::vector<node_t> apply_move(PartitionAssignment& a, const MovePlan& plan) {
  auto& src = a.sets.at(plan.from_pid);
  auto& dst = a.sets.at(plan.to_pid);
  if (plan.from_pid == plan.to_pid) throw std::invalid_argument("apply_move: from == to");
  if (plan.count == 0 || plan.count >= src.size())
    throw std::invalid_argument("apply_move: count must be in [1, |from| - 1]");
  std::vector<node_t> moved(src.end() - static_cast<std::ptrdiff_t>(plan.count), src.end());
  src.resize(src.size() - plan.count);
  for (const node_t v : moved) {
    a.owner[v] = static_cast<std::uint32_t>(plan.to_pid);
    a.position[v] = dst.size();
    dst.push_back(v);
  }
  return moved;
}

}  // namespace diter

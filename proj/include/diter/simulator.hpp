#pragma once

// Time-stepped simulation of K virtual machines (PIDs) sharing one D-iteration.
//
// Each step, in PID order: refresh r_k and s_k, decide idle/active, send the
// external fluid if s_k > r_k/2, then spend the PID_Speed operation budget on
// local diffusions. Messages are delivered after every PID has run, and the
// dynamic partition controller acts last.
//
// Cost model: one operation per local edge diffusion, per external product
// computed at exchange time, per entry received and per node migrated.
// Exchange, delivery and migration costs come out of the same budget; anything
// a PID cannot pay this step is carried as debt into the next one.

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "diter/core.hpp"
#include "diter/graph.hpp"
#include "diter/partition.hpp"
#include "diter/trace.hpp"

namespace diter {

enum class PartitionScheme { uniform, cb };

inline const char* to_string(PartitionScheme p) { return p == PartitionScheme::uniform ? "uniform" : "cb"; }

struct SimConfig {
  std::size_t k = 1;
  std::size_t pid_speed = 0;  // 0: max(1, N/K)
  double target_error = 1e-3;
  double epsilon = 0.0;       // 0: take it from the system
  double gamma = 1.2;
  double eta = 0.5;
  std::size_t z = 10;
  WeightScheme weight_scheme = WeightScheme::inv_out;
  PartitionScheme partition = PartitionScheme::uniform;
  bool dynamic = false;
  std::vector<std::size_t> initial_sizes;  // optional explicit contiguous blocks
  std::size_t max_steps = 1'000'000;
  std::size_t delay = 0;  // message latency in steps
  std::uint64_t seed = 0;
  bool record_trace = true;
};

// Fluid pushed to nodes outside the owning PID since its last exchange,
// accumulated per destination node.
class OutBuffer {
public:
  // Adds `amount` to node j; returns the change of the L1 norm.
  double add(node_t j, double amount) {
    auto [it, fresh] = index_.try_emplace(j, entries_.size());
    if (fresh) {
      entries_.emplace_back(j, amount);
      return std::abs(amount);
    }
    double& v = entries_[it->second].second;
    const double before = std::abs(v);
    v += amount;
    return std::abs(v) - before;
  }

  // Removes node j's entry, returning its amount (0 if absent).
  double take(node_t j) {
    const auto it = index_.find(j);
    if (it == index_.end()) return 0.0;
    const std::size_t slot = it->second;
    const double v = entries_[slot].second;
    index_.erase(it);
    if (slot + 1 != entries_.size()) {
      entries_[slot] = entries_.back();
      index_[entries_[slot].first] = slot;
    }
    entries_.pop_back();
    return v;
  }

  double get(node_t j) const {
    const auto it = index_.find(j);
    return it == index_.end() ? 0.0 : entries_[it->second].second;
  }

  double l1() const {
    double s = 0.0;
    for (const auto& e : entries_) s += std::abs(e.second);
    return s;
  }

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::pair<node_t, double>>& entries() const noexcept { return entries_; }

  void clear() {
    entries_.clear();
    index_.clear();
  }

private:
  std::vector<std::pair<node_t, double>> entries_;
  std::unordered_map<node_t, std::size_t> index_;
};

// Local state of one PID. f, h and h_old are aligned with the PID's node list
// in the partition assignment.
struct PidState {
  std::vector<double> f;
  std::vector<double> h;
  std::vector<double> h_old;
  std::vector<char> dirty;                // h != h_old since the last exchange
  std::vector<std::size_t> dirty_list;    // positions flagged in `dirty`
  OutBuffer out;
  double r = 0.0;
  double s = 0.0;
  SelectorState selector;
  bool active = true;
  op_count count_active = 0;
  op_count count_idle = 0;
  op_count debt = 0;  // operations already charged but not yet paid from a budget

  void refresh() {
    double sum = 0.0;
    for (const double v : f) sum += std::abs(v);
    r = sum;
    s = out.l1();
  }
};

struct ExchangeMessage {
  std::size_t from_pid = 0;
  std::size_t to_pid = 0;
  std::vector<std::pair<node_t, double>> deliveries;
  std::size_t due_step = 0;
};

// r_k < max(s_k/10, target * epsilon / K / 10) means idle.
inline bool idle_check(double r, double s, double target_error, double epsilon, std::size_t k) {
  const double floor = target_error * epsilon / static_cast<double>(k) / 10.0;
  return !(r < std::max(s / 10.0, floor));
}

// Send once the buffered fluid exceeds half the local residual.
inline bool should_exchange(const PidState& pid) { return pid.s > pid.r / 2.0 && !pid.out.empty(); }

// T <- min(T * (r + received) / r, received), r being the residual before
// delivery; T <- received when that residual is zero.
inline double reinit_threshold(double t, double r_before, double received) {
  if (!(received > 0.0)) return t;
  if (r_before > 0.0) return std::min(t * (r_before + received) / r_before, received);
  return received;
}

class non_convergence_error : public std::runtime_error {
public:
  non_convergence_error(const std::string& what, Trace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const Trace& trace() const noexcept { return trace_; }

private:
  Trace trace_;
};

class Simulator {
public:
  Simulator(const LinearSystem& sys, SimConfig cfg) : sys_(&sys), cfg_(std::move(cfg)) {
    const std::size_t n = sys.n();
    if (cfg_.k == 0 || cfg_.k > n) throw std::invalid_argument("simulator: need 1 <= k <= n");
    if (!(cfg_.target_error > 0.0)) throw std::invalid_argument("simulator: target_error must be positive");
    if (cfg_.pid_speed == 0) cfg_.pid_speed = std::max<std::size_t>(1, n / cfg_.k);
    if (cfg_.epsilon == 0.0) cfg_.epsilon = sys.epsilon;
    if (!(cfg_.gamma > 1.0)) throw std::invalid_argument("simulator: gamma must be > 1");

    weights_ = node_weights(sys.graph, cfg_.weight_scheme);
    if (!cfg_.initial_sizes.empty()) {
      std::size_t total = 0;
      for (auto s : cfg_.initial_sizes) {
        if (s == 0) throw std::invalid_argument("simulator: initial set sizes must be positive");
        total += s;
      }
      if (cfg_.initial_sizes.size() != cfg_.k || total != n)
        throw std::invalid_argument("simulator: initial_sizes must list k sizes summing to N");
      assign_ = partition_from_sizes(cfg_.initial_sizes);
    } else if (cfg_.partition == PartitionScheme::uniform) {
      assign_ = uniform_partition(n, cfg_.k);
    } else {
      assign_ = cb_partition(sys.graph.out_degrees(), cfg_.k);
    }
    tracker_ = make_slope_tracker(cfg_.k, cfg_.eta, cfg_.target_error, cfg_.z);

    pids_.resize(cfg_.k);
    for (std::size_t p = 0; p < cfg_.k; ++p) {
      auto& pid = pids_[p];
      const auto& nodes = assign_.sets[p];
      pid.f.resize(nodes.size());
      for (std::size_t q = 0; q < nodes.size(); ++q) pid.f[q] = sys.b[nodes[q]];
      pid.h.assign(nodes.size(), 0.0);
      pid.h_old.assign(nodes.size(), 0.0);
      pid.dirty.assign(nodes.size(), 0);
      pid.selector = make_selector(pid.f, nodes, weights_, cfg_.gamma);
      pid.refresh();
    }

    trace_.n = n;
    trace_.l = sys.graph.links();
    trace_.k = cfg_.k;
    trace_.partition = cfg_.initial_sizes.empty() ? to_string(cfg_.partition) : "sizes";
    trace_.dynamic = cfg_.dynamic;
    trace_.target_error = cfg_.target_error;
    trace_.epsilon = cfg_.epsilon;
    trace_.pid_speed = cfg_.pid_speed;
    refresh();
  }

  const SimConfig& config() const noexcept { return cfg_; }
  const LinearSystem& system() const noexcept { return *sys_; }
  const PartitionAssignment& assignment() const noexcept { return assign_; }
  const std::vector<PidState>& pids() const noexcept { return pids_; }
  const std::deque<ExchangeMessage>& in_flight() const noexcept { return inflight_; }
  const SlopeTracker& tracker() const noexcept { return tracker_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t steps() const noexcept { return step_; }
  op_count edge_ops() const noexcept { return edge_ops_; }
  bool converged() const noexcept { return converged_; }
  double global_residual() const noexcept { return global_; }
  const Trace& trace() const noexcept { return trace_; }

  // Recomputes r_k, s_k and the global residual exactly.
  double refresh() {
    double g = 0.0;
    for (auto& pid : pids_) {
      pid.refresh();
      g += pid.r + pid.s;
    }
    double fly = 0.0;
    for (const auto& m : inflight_)
      for (const auto& d : m.deliveries) fly += std::abs(d.second);
    inflight_l1_ = fly;
    global_ = g + fly;
    return global_;
  }

  // Refreshes the residuals and latches convergence.
  bool check_converged() {
    if (converged_) return true;
    refresh();
    converged_ = global_ <= cfg_.target_error;
    return converged_;
  }

  // Runs one time step. Returns false (and does nothing) once the global
  // residual is at or below the target at the start of the step.
  bool advance() {
    if (check_converged()) return false;

    const auto speed = static_cast<op_count>(cfg_.pid_speed);
    for (std::size_t p = 0; p < cfg_.k; ++p) {
      auto& pid = pids_[p];
      pid.active = idle_check(pid.r, pid.s, cfg_.target_error, cfg_.epsilon, cfg_.k);
      exchange_check_and_send(p);
      const op_count paid = std::min(pid.debt, speed);
      pid.debt -= paid;
      pid_step(p, speed - paid);
    }

    deliver_due();

    for (std::size_t p = 0; p < cfg_.k; ++p) update_slope(tracker_, p, pids_[p].r, pids_[p].s);
    if (cfg_.dynamic && cfg_.k >= 2) {
      tick(tracker_);
      const auto sizes = assign_.sizes();
      if (auto plan = plan_reaffectation(tracker_, sizes)) apply_migration(*plan);
    }

    if (cfg_.record_trace) trace_.records.push_back(snapshot(step_));
    ++step_;
    return true;
  }

  // Sends PID p's external fluid when s_k > r_k/2: one message per destination
  // PID, H_old := H, and one operation per external product charged to the
  // sender. Returns the messages queued (empty when holding).
  std::vector<ExchangeMessage> exchange_check_and_send(std::size_t p) {
    auto& pid = pids_[p];
    if (!should_exchange(pid)) return {};
    charge(pid, exchange_products(p));
    auto msgs = drain(p);
    for (auto& m : msgs) {
      m.due_step = step_ + cfg_.delay;
      inflight_.push_back(m);
    }
    return msgs;
  }

  // Spends `budget` operations of PID p on local diffusions. An idle PID, a
  // drained set or a reached global target leaves the rest to count_idle. A
  // column is never split: its overshoot becomes debt. Returns the number of
  // local edge operations performed.
  op_count pid_step(std::size_t p, op_count budget) {
    auto& pid = pids_[p];
    op_count used = 0;
    if (pid.active) {
      const auto& nodes = assign_.sets[p];
      while (used < budget && global_ > cfg_.target_error) {
        const auto pick = select_next(pid.selector, pid.f, nodes, weights_);
        if (!pick) break;
        used += diffuse_local(p, *pick);
      }
    }
    edge_ops_ += used;
    pid.count_active += used;
    if (used > budget) pid.debt += used - budget;
    else pid.count_idle += budget - used;
    return used;
  }

  // Delivers every in-flight message whose due step has come.
  void deliver_due() {
    while (!inflight_.empty() && inflight_.front().due_step <= step_) {
      ExchangeMessage m = std::move(inflight_.front());
      inflight_.pop_front();
      deliver(m);
    }
  }

  // Adds the message's fluid to the receiver, one operation per entry, and
  // resets its threshold to min(T (r + received) / r, received).
  void deliver(const ExchangeMessage& m) {
    auto& dst = pids_[m.to_pid];
    double received = 0.0;
    double dr = 0.0;
    for (const auto& [j, amount] : m.deliveries) {
      if (assign_.owner[j] != m.to_pid)
        throw std::logic_error("delivery to node " + std::to_string(j) + " not owned by PID " +
                               std::to_string(m.to_pid));
      double& fj = dst.f[assign_.position[j]];
      const double before = std::abs(fj);
      fj += amount;
      dr += std::abs(fj) - before;
      received += std::abs(amount);
    }
    dst.selector.threshold = reinit_threshold(dst.selector.threshold, dst.r, received);
    dst.r += dr;
    inflight_l1_ -= received;
    global_ += dr - received;
    charge(dst, m.deliveries.size());
    dst.active = true;
  }

  // Executes a move plan: flush the source, hand over the tail of its node
  // list with F and H (H_old := H at the destination), and charge both ends
  // one operation per node. Returns the moved node ids.
  std::vector<node_t> apply_migration(const MovePlan& plan) {
    auto& src = pids_[plan.from_pid];
    auto& dst = pids_[plan.to_pid];

    charge(src, exchange_products(plan.from_pid));
    auto flushed = drain(plan.from_pid);

    const auto moved = apply_move(assign_, plan);
    const std::size_t keep = src.f.size() - moved.size();
    for (std::size_t c = 0; c < moved.size(); ++c) {
      dst.f.push_back(src.f[keep + c]);
      dst.h.push_back(src.h[keep + c]);
      dst.h_old.push_back(src.h[keep + c]);
      dst.dirty.push_back(0);
    }
    src.f.resize(keep);
    src.h.resize(keep);
    src.h_old.resize(keep);
    src.dirty.resize(keep);

    // Fluid the destination had buffered for its new nodes is now local.
    op_count absorbed = 0;
    for (const node_t v : moved) {
      if (dst.out.empty()) break;
      const double amount = dst.out.take(v);
      if (amount != 0.0) {
        dst.f[assign_.position[v]] += amount;
        ++absorbed;
      }
    }
    charge(dst, absorbed);

    charge(src, moved.size());
    charge(dst, moved.size());
    src.selector.cursor = 0;
    dst.selector.cursor = 0;

    for (auto& m : flushed) {
      m.due_step = step_ + cfg_.delay;
      inflight_.push_back(std::move(m));
    }
    reroute_in_flight();
    if (cfg_.delay == 0) {
      while (!inflight_.empty()) {
        ExchangeMessage m = std::move(inflight_.front());
        inflight_.pop_front();
        deliver(m);
      }
    }
    src.refresh();
    dst.refresh();
    double g = inflight_l1_;
    for (const auto& pid : pids_) g += pid.r + pid.s;
    global_ = g;
    return moved;
  }

  // Global H, assembled from the PIDs.
  std::vector<double> solution() const { return gather([](const PidState& s) -> const auto& { return s.h; }); }

  // Global F plus every buffered or in-flight amount added at its destination.
  std::vector<double> total_fluid() const {
    auto f = gather([](const PidState& s) -> const auto& { return s.f; });
    for (const auto& pid : pids_)
      for (const auto& [j, v] : pid.out.entries()) f[j] += v;
    for (const auto& m : inflight_)
      for (const auto& [j, v] : m.deliveries) f[j] += v;
    return f;
  }

  op_count total_active() const {
    op_count t = 0;
    for (const auto& p : pids_) t += p.count_active;
    return t;
  }

  TraceRecord snapshot(std::size_t step) const {
    TraceRecord rec;
    rec.step = step;
    rec.pids.reserve(cfg_.k);
    double g = inflight_l1_;
    for (std::size_t p = 0; p < cfg_.k; ++p) {
      const auto& pid = pids_[p];
      rec.pids.push_back({pid.r, pid.s, tracker_.slope[p], assign_.sets[p].size(), pid.count_active,
                          pid.count_idle, pid.active});
      g += pid.r + pid.s;
    }
    rec.global_residual = g;
    rec.global_bound = error_bound(g, cfg_.epsilon);
    return rec;
  }

  // Final trace; call after the loop has stopped.
  Trace finish() {
    trace_.converged = converged_;
    trace_.steps = step_;
    trace_.final = snapshot(step_);
    return trace_;
  }

private:
  template <typename Field>
  std::vector<double> gather(Field field) const {
    std::vector<double> out(sys_->n(), 0.0);
    for (std::size_t p = 0; p < cfg_.k; ++p) {
      const auto& v = field(pids_[p]);
      const auto& nodes = assign_.sets[p];
      for (std::size_t q = 0; q < nodes.size(); ++q) out[nodes[q]] = v[q];
    }
    return out;
  }

  static void charge(PidState& pid, op_count ops) {
    pid.count_active += ops;
    pid.debt += ops;
  }

  // Diffuses the node at local position q; returns the number of local edges.
  op_count diffuse_local(std::size_t p, std::size_t q) {
    auto& pid = pids_[p];
    const node_t i = assign_.sets[p][q];
    const double sent = pid.f[q];
    pid.h[q] += sent;
    pid.f[q] = 0.0;
    if (!pid.dirty[q]) {
      pid.dirty[q] = 1;
      pid.dirty_list.push_back(q);
    }
    double dr = -std::abs(sent);
    double ds = 0.0;
    op_count local = 0;
    const auto rows = sys_->graph.rows(i);
    const auto ws = sys_->graph.weights(i);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      const node_t j = rows[e];
      const double amount = sent * ws[e];
      if (assign_.owner[j] == p) {
        double& fj = pid.f[assign_.position[j]];
        const double before = std::abs(fj);
        fj += amount;
        dr += std::abs(fj) - before;
        ++local;
      } else {
        ds += pid.out.add(j, amount);
      }
    }
    pid.r += dr;
    pid.s += ds;
    global_ += dr + ds;
    return local;
  }

  // Cost of computing C_k(P)([H]_k - [H_old]_k) on external rows: one
  // product per external link of every node diffused since the last exchange.
  op_count exchange_products(std::size_t p) const {
    const auto& pid = pids_[p];
    const auto& nodes = assign_.sets[p];
    op_count products = 0;
    for (const std::size_t q : pid.dirty_list)
      for (const node_t j : sys_->graph.rows(nodes[q]))
        if (assign_.owner[j] != p) ++products;
    return products;
  }

  // Empties PID p's out buffer into one message per destination PID and
  // resets H_old. The caller charges the sender.
  std::vector<ExchangeMessage> drain(std::size_t p) {
    auto& pid = pids_[p];
    auto entries = pid.out.entries();
    std::sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
      const auto oa = assign_.owner[a.first], ob = assign_.owner[b.first];
      return oa != ob ? oa < ob : a.first < b.first;
    });
    std::vector<ExchangeMessage> msgs;
    double moved = 0.0;
    for (const auto& e : entries) {
      const std::size_t dst = assign_.owner[e.first];
      if (msgs.empty() || msgs.back().to_pid != dst) msgs.push_back({p, dst, {}, 0});
      msgs.back().deliveries.push_back(e);
      moved += std::abs(e.second);
    }
    pid.out.clear();
    for (const std::size_t q : pid.dirty_list) {
      pid.h_old[q] = pid.h[q];
      pid.dirty[q] = 0;
    }
    pid.dirty_list.clear();
    global_ -= pid.s;
    pid.s = 0.0;
    inflight_l1_ += moved;
    global_ += moved;
    return msgs;
  }

  // Splits in-flight messages whose nodes changed owner after a migration.
  void reroute_in_flight() {
    std::deque<ExchangeMessage> out;
    for (auto& m : inflight_) {
      const bool stale = std::any_of(m.deliveries.begin(), m.deliveries.end(),
                                     [&](const auto& d) { return assign_.owner[d.first] != m.to_pid; });
      if (!stale) {
        out.push_back(std::move(m));
        continue;
      }
      std::vector<ExchangeMessage> parts;
      for (const auto& d : m.deliveries) {
        const std::size_t owner = assign_.owner[d.first];
        auto it = std::find_if(parts.begin(), parts.end(), [&](const auto& x) { return x.to_pid == owner; });
        if (it == parts.end()) {
          parts.push_back({m.from_pid, owner, {}, m.due_step});
          it = parts.end() - 1;
        }
        it->deliveries.push_back(d);
      }
      for (auto& part : parts) out.push_back(std::move(part));
    }
    inflight_ = std::move(out);
  }

  const LinearSystem* sys_;
  SimConfig cfg_;
  std::vector<double> weights_;
  PartitionAssignment assign_;
  SlopeTracker tracker_;
  std::vector<PidState> pids_;
  std::deque<ExchangeMessage> inflight_;
  double inflight_l1_ = 0.0;
  double global_ = 0.0;
  std::size_t step_ = 0;
  op_count edge_ops_ = 0;
  bool converged_ = false;
  Trace trace_;
};

struct SimulationResult {
  Trace trace;
  std::vector<double> h;
  op_count edge_ops = 0;  // local edge diffusions only
};

// Runs until the global residual reaches the target. Throws
// non_convergence_error carrying the trace when max_steps is hit first.
inline SimulationResult run(const LinearSystem& sys, const SimConfig& cfg) {
  Simulator sim(sys, cfg);
  while (!sim.check_converged()) {
    if (sim.steps() >= sim.config().max_steps) {
      throw non_convergence_error("simulation did not converge within " + std::to_string(sim.config().max_steps) +
                                      " steps (global residual " + std::to_string(sim.global_residual()) + ")",
                                  sim.finish());
    }
    sim.advance();
  }
  SimulationResult res;
  res.h = sim.solution();
  res.edge_ops = sim.edge_ops();
  res.trace = sim.finish();
  return res;
}

}  // namespace diter

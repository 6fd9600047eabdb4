#pragma once

#include <string>
#include <vector>

#include "diter/types.hpp"

namespace diter {

struct PidSample {
  double r = 0.0;
  double s = 0.0;
  double slope = 0.0;
  std::size_t set_size = 0;
  op_count count_active = 0;
  op_count count_idle = 0;
  bool active = true;

  friend bool operator==(const PidSample&, const PidSample&) = default;
};

// State of every PID at the end of one time step.
struct TraceRecord {
  std::size_t step = 0;
  std::vector<PidSample> pids;
  double global_residual = 0.0;  // sum of r_k + s_k + in-flight fluid
  double global_bound = 0.0;     // global_residual / epsilon

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  std::size_t n = 0;
  std::size_t l = 0;
  std::size_t k = 0;
  std::string partition;  // "uniform" or "cb"
  bool dynamic = false;
  double target_error = 0.0;
  double epsilon = 1.0;
  std::size_t pid_speed = 0;

  std::vector<TraceRecord> records;  // empty when per-step recording is off
  TraceRecord final;                 // state when the run stopped
  bool converged = false;
  std::size_t steps = 0;
};

}  // namespace diter

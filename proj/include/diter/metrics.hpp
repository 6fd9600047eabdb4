#pragma once

// Derived measurements over simulation traces and their CSV export.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "diter/trace.hpp"
#include "diter/types.hpp"

namespace diter {

// (count_active + count_idle) / L: one unit is roughly one matrix-vector product.
inline double normalized_iterations(op_count count_active, op_count count_idle, std::size_t l) {
  if (l == 0) throw std::invalid_argument("normalized_iterations: link count must be positive");
  return static_cast<double>(count_active + count_idle) / static_cast<double>(l);
}

inline double slowest_pid_time(const TraceRecord& rec, std::size_t l) {
  double worst = 0.0;
  for (const auto& p : rec.pids) worst = std::max(worst, normalized_iterations(p.count_active, p.count_idle, l));
  return worst;
}

// Computation time of the slowest PID at the end of a converged run.
inline double slowest_pid_time(const Trace& trace, std::size_t l) {
  if (!trace.converged) throw std::runtime_error("slowest_pid_time: trace did not converge");
  return slowest_pid_time(trace.final, l);
}

inline double slowest_pid_time(const Trace& trace) { return slowest_pid_time(trace, trace.l); }

// sum_k count_idle / sum_k (count_active + count_idle).
inline double idle_proportion(const TraceRecord& rec) {
  op_count idle = 0, total = 0;
  for (const auto& p : rec.pids) {
    idle += p.count_idle;
    total += p.count_active + p.count_idle;
  }
  if (total == 0) throw std::runtime_error("idle_proportion: no operations recorded");
  return static_cast<double>(idle) / static_cast<double>(total);
}

inline double idle_proportion(const Trace& trace) { return idle_proportion(trace.final); }

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* trace_csv_header = "step,pid,r_k,s_k,slope_k,set_size,count_active,count_idle,active";
inline constexpr const char* summary_csv_header =
    "n,l,k,partition,dynamic,target_error,normalized_iterations_slowest,idle_proportion,steps";
inline constexpr const char* convergence_csv_header = "step_normalized_iterations,log10_global_bound";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << trace_csv_header << '\n';
  for (const auto& rec : trace.records) {
    for (std::size_t p = 0; p < rec.pids.size(); ++p) {
      const auto& s = rec.pids[p];
      out << rec.step << ',' << p << ',' << format_double(s.r) << ',' << format_double(s.s) << ','
          << format_double(s.slope) << ',' << s.set_size << ',' << s.count_active << ',' << s.count_idle << ','
          << (s.active ? 1 : 0) << '\n';
    }
  }
}

inline void write_summary_csv(std::ostream& out, const Trace& trace, bool header = true) {
  if (header) out << summary_csv_header << '\n';
  const bool ok = trace.converged && trace.l > 0;
  out << trace.n << ',' << trace.l << ',' << trace.k << ',' << trace.partition << ',' << (trace.dynamic ? 1 : 0)
      << ',' << format_double(trace.target_error) << ','
      << (ok ? format_double(slowest_pid_time(trace)) : std::string("nan")) << ','
      << (ok ? format_double(idle_proportion(trace)) : std::string("nan")) << ',' << trace.steps << '\n';
}

inline void write_convergence_csv(std::ostream& out, const Trace& trace) {
  out << convergence_csv_header << '\n';
  if (trace.l == 0) return;
  for (const auto& rec : trace.records)
    out << format_double(slowest_pid_time(rec, trace.l)) << ',' << format_double(std::log10(rec.global_bound))
        << '\n';
}

inline constexpr const char* partition_csv_header = "step,pid,set_size";

// Set sizes per step, for plotting how the partition evolves.
inline void write_partition_csv(std::ostream& out, const Trace& trace) {
  out << partition_csv_header << '\n';
  for (const auto& rec : trace.records)
    for (std::size_t p = 0; p < rec.pids.size(); ++p) out << rec.step << ',' << p << ',' << rec.pids[p].set_size << '\n';
}

struct CsvPaths {
  std::string trace;
  std::string summary;
  std::string convergence;
};

namespace detail {
template <typename Fn>
void write_file(const std::string& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  fn(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}
}  // namespace detail

inline void write_csv(const Trace& trace, const CsvPaths& paths) {
  detail::write_file(paths.trace, [&](std::ostream& o) { write_trace_csv(o, trace); });
  detail::write_file(paths.summary, [&](std::ostream& o) { write_summary_csv(o, trace); });
  detail::write_file(paths.convergence, [&](std::ostream& o) { write_convergence_csv(o, trace); });
}

// Parses a trace CSV back into per-step records (PID samples only).
inline std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::vector<TraceRecord> recs;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line != trace_csv_header) throw parse_error("missing trace header", 1);
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 9) throw parse_error("expected 9 fields", lineno);
    try {
      const std::size_t step = std::stoull(cells[0]);
      const std::size_t pid = std::stoull(cells[1]);
      PidSample s;
      s.r = std::stod(cells[2]);
      s.s = std::stod(cells[3]);
      s.slope = std::stod(cells[4]);
      s.set_size = std::stoull(cells[5]);
      s.count_active = std::stoull(cells[6]);
      s.count_idle = std::stoull(cells[7]);
      s.active = cells[8] == "1";
      if (recs.empty() || recs.back().step != step) {
        recs.push_back({});
        recs.back().step = step;
      }
      if (pid != recs.back().pids.size()) throw parse_error("pid rows out of order", lineno);
      recs.back().pids.push_back(s);
    } catch (const std::logic_error&) {
      throw parse_error("bad numeric field", lineno);
    }
  }
  return recs;
}

}  // namespace diter

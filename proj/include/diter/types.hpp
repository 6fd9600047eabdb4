#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace diter {

using node_t = std::uint32_t;
using op_count = std::uint64_t;

// Malformed input file (edge list, config, CSV).
class parse_error : public std::runtime_error {
public:
  parse_error(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Raised by the sequential solver when the operation budget runs out.
class divergence_error : public std::runtime_error {
public:
  divergence_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

}  // namespace diter

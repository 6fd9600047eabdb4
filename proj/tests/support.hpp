#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diter/graph.hpp"

namespace support {

inline diter::LinearSystem pagerank(std::size_t n, std::uint64_t seed, double d = 0.85) {
  auto g = diter::synth_power_law(n, 1.5, seed);
  g = diter::reorder_nodes(g, diter::NodeOrdering::random(seed));
  return diter::build_pagerank_system(g, d);
}

// Unit-weight graph from an edge list.
inline diter::ColumnGraph graph(std::size_t n, std::vector<diter::edge_t> edges) {
  return diter::ColumnGraph::from_edges(n, std::move(edges));
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("diter_test_" + name)).string();
}

}  // namespace support

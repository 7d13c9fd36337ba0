#pragma once

// Test-only random tree generation and an independent ancestor-set oracle
// for the predefined adjacency.

#include "hhar/rng.hpp"
#include "hhar/types.hpp"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hhar::testing {

/// Random rooted tree edges over `n` real nodes named n0..n{n-1} under a
/// root named "root". Parent of ni is the root or any earlier node.
inline std::vector<std::pair<std::string, std::string>> random_tree_edges(
    Index n, Rng& rng) {
  std::vector<std::pair<std::string, std::string>> edges;
  for (Index i = 0; i < n; ++i) {
    const std::size_t pick = rng.below(static_cast<std::size_t>(i) + 1);
    const std::string parent =
        pick == 0 ? std::string("root") : "n" + std::to_string(pick - 1);
    edges.emplace_back(parent, "n" + std::to_string(i));
  }
  return edges;
}

/// Brute-force ancestor-overlap adjacency computed straight from the edge
/// list by name: enumerates H(v) per node (parent chain plus the root) and
/// forms |H(i) n H(j)| / |H(i)| for every ordered pair.
inline Matrix oracle_adjacency(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::vector<std::string>& node_order, const std::string& root) {
  std::vector<std::set<std::string>> ancestor_sets;
  for (const auto& node : node_order) {
    std::set<std::string> anc;
    std::string cur = node;
    while (cur != root) {
      for (const auto& [p, c] : edges) {
        if (c == cur) {
          anc.insert(p);
          cur = p;
          break;
        }
      }
    }
    ancestor_sets.push_back(std::move(anc));  // includes the root name
  }
  const Index n = static_cast<Index>(node_order.size());
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      std::size_t shared = 0;
      for (const auto& name : ancestor_sets[i])
        shared += ancestor_sets[j].count(name);
      a(i, j) = static_cast<Real>(shared) /
                static_cast<Real>(ancestor_sets[i].size());
    }
  }
  return a;
}

}  // namespace hhar::testing

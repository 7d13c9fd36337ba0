#pragma once

#include "hhar/param_store.hpp"
#include "hhar/tensor.hpp"

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hhar {

/// Rooted label hierarchy over N classifiable nodes.
///
/// The root is virtual: it is not a classifiable label and carries no index,
/// but it is counted inside every node's ancestor set H(v), so |H(v)| >= 1
/// for every node and top-level siblings share one ancestor. Node indices
/// 0..N-1 follow first appearance in the edge list and are used by every
/// matrix built from the hierarchy.
class LabelHierarchy {
 public:
  /// Builds from (parent, child) edges. The virtual root is the unique name
  /// that never appears as a child. Rejects cycles, multiple parents,
  /// duplicate edges and ambiguous roots.
  static LabelHierarchy from_edges(
      const std::vector<std::pair<std::string, std::string>>& edges);

  /// Reads a UTF-8 edge file, one `parent<TAB>child` per line.
  static LabelHierarchy load(const std::string& path);
  void save(const std::string& path) const;

  Index size() const { return static_cast<Index>(names_.size()); }
  const std::string& root() const { return root_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(Index v) const { return names_.at(v); }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Index index_of(const std::string& name) const;

  /// Parent index, or -1 when the parent is the virtual root.
  Index parent(Index v) const { return parent_.at(v); }
  /// Real ancestors of v, nearest first; the virtual root is excluded here.
  const std::vector<Index>& ancestors(Index v) const {
    return ancestors_.at(v);
  }
  /// |H(v)|: real ancestors plus the virtual root.
  Index ancestor_set_size(Index v) const {
    return static_cast<Index>(ancestors_.at(v).size()) + 1;
  }
  /// Real nodes on the root path including v itself.
  Index depth(Index v) const {
    return static_cast<Index>(ancestors_.at(v).size()) + 1;
  }
  bool is_leaf(Index v) const { return is_leaf_.at(v); }
  std::vector<Index> leaves() const;

  /// Binary vector over all N nodes: one for the terminal and every real
  /// ancestor on its root path, zero elsewhere.
  Vector expand_label_set(Index terminal) const;
  Vector expand_label_set(const std::string& terminal) const;

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Index> index_;
  std::vector<Index> parent_;
  std::vector<std::vector<Index>> ancestors_;
  std::vector<bool> is_leaf_;
  std::string root_;
};

/// Ancestor-overlap adjacency: A[i][j] = |H(vi) n H(vj)| / |H(vi)| for
/// i != j, zero on the diagonal. Generally asymmetric.
Matrix build_predefined_adjacency(const LabelHierarchy& h);

/// I + D^{-1/2} A D^{-1/2} with D = diag(row sums of A); zero-degree rows
/// contribute nothing off-diagonal. Rejects negative entries.
Matrix normalize_adjacency(const Matrix& a);

/// Self-adaptive adjacency row_softmax(relu(e1 * e2^T)); differentiable with
/// respect to both node-embedding tables.
Tensor adaptive_adjacency(const Tensor& e1, const Tensor& e2);

/// The predefined graph (raw and normalized) plus the trainable embeddings
/// that generate the adaptive graph each forward pass.
struct GraphPair {
  Matrix adjacency;     // A
  Matrix normalized;    // I + D^{-1/2} A D^{-1/2}
  Tensor source_embed;  // E1, N x d_f
  Tensor target_embed;  // E2, N x d_f
};

GraphPair build_graph_pair(const LabelHierarchy& h, Index embed_dim, Rng& rng);

}  // namespace hhar

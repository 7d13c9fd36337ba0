#include "hhar/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hhar {

LabelHierarchy LabelHierarchy::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  if (edges.empty())
    throw std::invalid_argument("hierarchy: no edges");

  // First-appearance order over all names; parents recorded by name.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::string> parent_of;
  std::set<std::pair<std::string, std::string>> seen_edges;
  auto note = [&](const std::string& n) {
    if (std::find(order.begin(), order.end(), n) == order.end())
      order.push_back(n);
  };
  for (const auto& [parent, child] : edges) {
    if (parent.empty() || child.empty())
      throw std::invalid_argument("hierarchy: empty node name in edge");
    if (parent == child)
      throw std::invalid_argument("hierarchy: self-edge at '" + parent + "'");
    if (!seen_edges.insert({parent, child}).second)
      throw std::invalid_argument("hierarchy: duplicate edge '" + parent +
                                  "' -> '" + child + "'");
    if (parent_of.count(child))
      throw std::invalid_argument("hierarchy: node '" + child +
                                  "' has multiple parents");
    note(parent);
    note(child);
    parent_of.emplace(child, parent);
  }

  std::vector<std::string> roots;
  for (const auto& n : order)
    if (!parent_of.count(n)) roots.push_back(n);
  if (roots.empty())
    throw std::invalid_argument("hierarchy: no root (cycle spans all nodes)");
  if (roots.size() > 1) {
    std::string msg = "hierarchy: ambiguous root, candidates:";
    for (const auto& r : roots) msg += " '" + r + "'";
    throw std::invalid_argument(msg);
  }

  LabelHierarchy h;
  h.root_ = roots.front();
  for (const auto& n : order) {
    if (n == h.root_) continue;
    h.index_.emplace(n, static_cast<Index>(h.names_.size()));
    h.names_.push_back(n);
  }

  const Index n = h.size();
  h.parent_.resize(n);
  h.ancestors_.resize(n);
  h.is_leaf_.assign(n, true);
  for (Index v = 0; v < n; ++v) {
    const std::string& pname = parent_of.at(h.names_[v]);
    h.parent_[v] = pname == h.root_ ? -1 : h.index_.at(pname);
    if (h.parent_[v] >= 0) h.is_leaf_[h.parent_[v]] = false;
  }
  for (Index v = 0; v < n; ++v) {
    std::vector<Index>& anc = h.ancestors_[v];
    Index cur = h.parent_[v];
    while (cur >= 0) {
      anc.push_back(cur);
      if (static_cast<Index>(anc.size()) > n)
        throw std::invalid_argument("hierarchy: cycle through '" +
                                    h.names_[v] + "'");
      cur = h.parent_[cur];
    }
  }
  return h;
}

LabelHierarchy LabelHierarchy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("hierarchy: cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw std::invalid_argument("hierarchy: line " + std::to_string(lineno) +
                                  " of '" + path +
                                  "' is not parent<TAB>child");
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return from_edges(edges);
}

void LabelHierarchy::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::invalid_argument("hierarchy: cannot write '" + path + "'");
  // Emit edges in first-appearance order of the child so a reload
  // reconstructs identical indices.
  for (Index v = 0; v < size(); ++v) {
    const Index p = parent_[v];
    out << (p < 0 ? root_ : names_[p]) << '\t' << names_[v] << '\n';
  }
}

Index LabelHierarchy::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::invalid_argument("hierarchy: unknown label '" + name + "'");
  return it->second;
}

std::vector<Index> LabelHierarchy::leaves() const {
  std::vector<Index> out;
  for (Index v = 0; v < size(); ++v)
    if (is_leaf_[v]) out.push_back(v);
  return out;
}

Vector LabelHierarchy::expand_label_set(Index terminal) const {
  if (terminal < 0 || terminal >= size())
    throw std::invalid_argument("expand_label_set: index " +
                                std::to_string(terminal) + " out of range");
  Vector y = Vector::Zero(size());
  y(terminal) = 1.0;
  for (Index a : ancestors_[terminal]) y(a) = 1.0;
  return y;
}

Vector LabelHierarchy::expand_label_set(const std::string& terminal) const {
  return expand_label_set(index_of(terminal));
}

Matrix build_predefined_adjacency(const LabelHierarchy& h) {
  const Index n = h.size();
  // Sorted ancestor index sets; the virtual root membership is implicit and
  // contributes one shared element to every intersection.
  std::vector<std::vector<Index>> anc(n);
  for (Index v = 0; v < n; ++v) {
    anc[v] = h.ancestors(v);
    std::sort(anc[v].begin(), anc[v].end());
  }
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const Real hi = static_cast<Real>(h.ancestor_set_size(i));
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;  // self-loops come from normalization's +I
      std::vector<Index> shared;
      std::set_intersection(anc[i].begin(), anc[i].end(), anc[j].begin(),
                            anc[j].end(), std::back_inserter(shared));
      a(i, j) = (static_cast<Real>(shared.size()) + 1.0) / hi;
    }
  }
  return a;
}

Matrix normalize_adjacency(const Matrix& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("normalize_adjacency: non-square input " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()));
  if ((a.array() < 0.0).any())
    throw std::invalid_argument("normalize_adjacency: negative entry");
  const Index n = a.rows();
  Vector d_inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    const Real deg = a.row(i).sum();
    d_inv_sqrt(i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Matrix out = d_inv_sqrt.asDiagonal() * a * d_inv_sqrt.asDiagonal();
  out += Matrix::Identity(n, n);
  return out;
}

Tensor adaptive_adjacency(const Tensor& e1, const Tensor& e2) {
  if (e1.rank() != 2 || e2.rank() != 2 || e1.shape() != e2.shape())
    throw std::invalid_argument(
        "adaptive_adjacency: embeddings must share an N x d_f shape, got " +
        e1.shape().str() + " and " + e2.shape().str());
  return row_softmax(relu(matmul(e1, transpose(e2))));
}

GraphPair build_graph_pair(const LabelHierarchy& h, Index embed_dim,
                           Rng& rng) {
  if (embed_dim <= 0)
    throw std::invalid_argument("build_graph_pair: embed_dim must be positive");
  GraphPair g;
  g.adjacency = build_predefined_adjacency(h);
  g.normalized = normalize_adjacency(g.adjacency);
  const Real s = 1.0 / std::sqrt(static_cast<Real>(embed_dim));
  g.source_embed = init_uniform(Shape{h.size(), embed_dim}, s, rng);
  g.target_embed = init_uniform(Shape{h.size(), embed_dim}, s, rng);
  return g;
}

}  // namespace hhar

#include "hhar/data.hpp"

#include "hhar/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace hhar {

std::vector<Index> Dataset::indices_of(Subset s) const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (assignment[i] == s) out.push_back(i);
  return out;
}

Matrix Dataset::targets(const std::vector<Index>& rows) const {
  Matrix y(static_cast<Index>(rows.size()), hierarchy.size());
  for (Index r = 0; r < y.rows(); ++r)
    y.row(r) = hierarchy.expand_label_set(terminals[rows[r]]).transpose();
  return y;
}

Dataset load_dataset(const std::string& features_path,
                     const std::string& hierarchy_path) {
  Dataset ds;
  ds.hierarchy = LabelHierarchy::load(hierarchy_path);

  std::ifstream in(features_path);
  if (!in)
    throw std::invalid_argument("dataset: cannot open '" + features_path +
                                "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("dataset: '" + features_path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line, ',');
  if (header.size() < 2)
    throw std::invalid_argument("dataset: header must list features and a "
                                "label column");
  const Index d = static_cast<Index>(header.size()) - 1;

  std::vector<Vector> rows;
  std::vector<Index> terminals;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (static_cast<Index>(fields.size()) != d + 1)
      throw std::invalid_argument(
          "dataset: row " + std::to_string(lineno) + " has " +
          std::to_string(fields.size()) + " fields, expected " +
          std::to_string(d + 1));
    Vector x(d);
    for (Index j = 0; j < d; ++j) {
      if (!parse_real(fields[j], x(j)))
        throw std::invalid_argument("dataset: row " + std::to_string(lineno) +
                                    ": bad number '" + fields[j] + "'");
    }
    const std::string label = trim(fields.back());
    if (!ds.hierarchy.has(label))
      throw std::invalid_argument("dataset: row " + std::to_string(lineno) +
                                  ": unknown label '" + label + "'");
    rows.push_back(std::move(x));
    terminals.push_back(ds.hierarchy.index_of(label));
  }

  ds.features.resize(static_cast<Index>(rows.size()), d);
  for (Index i = 0; i < ds.features.rows(); ++i)
    ds.features.row(i) = rows[i].transpose();
  ds.terminals = std::move(terminals);
  ds.assignment.assign(ds.terminals.size(), Subset::Train);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& features_path,
                  const std::string& hierarchy_path) {
  ds.hierarchy.save(hierarchy_path);
  std::ofstream out(features_path, std::ios::binary);
  if (!out)
    throw std::invalid_argument("dataset: cannot write '" + features_path +
                                "'");
  for (Index j = 0; j < ds.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < ds.dim(); ++j)
      out << format_real(ds.features(i, j)) << ',';
    out << ds.hierarchy.name(ds.terminals[i]) << '\n';
  }
}

Dataset split(Dataset ds, const std::array<Real, 3>& fractions,
              std::uint64_t seed) {
  Real total = 0.0;
  for (Real f : fractions) {
    if (f < 0.0)
      throw std::invalid_argument("split: negative fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions sum to " +
                                format_real(total) + ", expected 1");

  int nonzero = 0;
  for (Real f : fractions)
    if (f > 0.0) ++nonzero;

  // Group examples by terminal, in terminal-index order.
  std::map<Index, std::vector<Index>> by_class;
  for (Index i = 0; i < ds.size(); ++i) by_class[ds.terminals[i]].push_back(i);

  Rng rng(seed);
  for (auto& [terminal, members] : by_class) {
    const Index n_c = static_cast<Index>(members.size());
    if (n_c < nonzero)
      throw std::invalid_argument(
          "split: class '" + ds.hierarchy.name(terminal) + "' has " +
          std::to_string(n_c) + " examples, fewer than " +
          std::to_string(nonzero) + " nonzero splits");
    rng.shuffle(members);

    // Largest-remainder allocation, then guarantee one example for every
    // nonzero fraction.
    std::array<Index, 3> alloc{};
    std::array<Real, 3> remainder{};
    Index assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const Real quota = fractions[s] * static_cast<Real>(n_c);
      alloc[s] = static_cast<Index>(std::floor(quota));
      remainder[s] = quota - std::floor(quota);
      assigned += alloc[s];
    }
    for (Index left = n_c - assigned; left > 0; --left) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (remainder[s] > remainder[best]) best = s;
      ++alloc[best];
      remainder[best] = -1.0;
    }
    for (int s = 0; s < 3; ++s) {
      while (fractions[s] > 0.0 && alloc[s] == 0) {
        int donor = 0;
        for (int t = 1; t < 3; ++t)
          if (alloc[t] > alloc[donor]) donor = t;
        --alloc[donor];
        ++alloc[s];
      }
    }

    Index pos = 0;
    for (int s = 0; s < 3; ++s)
      for (Index k = 0; k < alloc[s]; ++k)
        ds.assignment[members[pos++]] = static_cast<Subset>(s);
  }
  return ds;
}

namespace {

void validate_spec(const SyntheticSpec& s) {
  if (s.depth < 1) throw std::invalid_argument("synthetic: depth must be >= 1");
  if (s.branching < 1)
    throw std::invalid_argument("synthetic: branching must be >= 1");
  if (s.dim < 1) throw std::invalid_argument("synthetic: dim must be >= 1");
  if (s.rho < 0.0 || s.rho >= 1.0)
    throw std::invalid_argument("synthetic: rho must lie in [0, 1)");
  if (s.sigma < 0.0)
    throw std::invalid_argument("synthetic: sigma must be >= 0");
  if (s.per_leaf < 1)
    throw std::invalid_argument("synthetic: per_leaf must be >= 1");
}

Vector random_unit(Index dim, Rng& rng) {
  Vector v(dim);
  do {
    for (Index i = 0; i < dim; ++i) v(i) = rng.normal(0.0, 1.0);
  } while (v.norm() < 1e-9);
  return v / v.norm();
}

}  // namespace

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("synthetic: cannot open '" + path + "'");
  SyntheticSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("synthetic: line " + std::to_string(lineno) +
                                  " of '" + path + "' is not key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    long long iv = 0;
    Real rv = 0.0;
    if (key == "depth" && parse_int(value, iv)) spec.depth = static_cast<int>(iv);
    else if (key == "branching" && parse_int(value, iv)) spec.branching = static_cast<int>(iv);
    else if (key == "dim" && parse_int(value, iv)) spec.dim = static_cast<Index>(iv);
    else if (key == "rho" && parse_real(value, rv)) spec.rho = rv;
    else if (key == "sigma" && parse_real(value, rv)) spec.sigma = rv;
    else if (key == "per_leaf" && parse_int(value, iv)) spec.per_leaf = static_cast<Index>(iv);
    else if (key == "seed" && parse_int(value, iv)) spec.seed = static_cast<std::uint64_t>(iv);
    else
      throw std::invalid_argument("synthetic: line " + std::to_string(lineno) +
                                  ": bad entry '" + t + "'");
  }
  validate_spec(spec);
  return spec;
}

void save_synthetic_spec(const SyntheticSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::invalid_argument("synthetic: cannot write '" + path + "'");
  out << "depth=" << spec.depth << '\n'
      << "branching=" << spec.branching << '\n'
      << "dim=" << spec.dim << '\n'
      << "rho=" << format_real(spec.rho) << '\n'
      << "sigma=" << format_real(spec.sigma) << '\n'
      << "per_leaf=" << spec.per_leaf << '\n'
      << "seed=" << spec.seed << '\n';
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);

  // Full branching-ary tree, breadth first: top level c0..c{b-1}, children
  // appending _j. Prototypes walk the unit sphere level by level.
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> frontier{"root"};
  std::map<std::string, Vector> proto;
  proto["root"] = random_unit(spec.dim, rng);
  std::vector<std::string> leaves;
  for (int level = 0; level < spec.depth; ++level) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      for (int j = 0; j < spec.branching; ++j) {
        const std::string child =
            parent == "root" ? "c" + std::to_string(j)
                             : parent + "_" + std::to_string(j);
        edges.emplace_back(parent, child);
        Vector raw = spec.rho * proto[parent] +
                     (1.0 - spec.rho) * random_unit(spec.dim, rng);
        while (raw.norm() < 1e-9)
          raw = spec.rho * proto[parent] +
                (1.0 - spec.rho) * random_unit(spec.dim, rng);
        proto[child] = raw / raw.norm();
        next.push_back(child);
      }
    }
    frontier = std::move(next);
  }
  leaves = frontier;

  SyntheticData out;
  out.dataset.hierarchy = LabelHierarchy::from_edges(edges);
  const Index n = static_cast<Index>(leaves.size()) * spec.per_leaf;
  out.dataset.features.resize(n, spec.dim);
  out.dataset.terminals.reserve(n);
  Index row = 0;
  for (const auto& leaf : leaves) {
    const Index terminal = out.dataset.hierarchy.index_of(leaf);
    out.leaf_prototypes[leaf] = proto[leaf];
    for (Index k = 0; k < spec.per_leaf; ++k, ++row) {
      for (Index j = 0; j < spec.dim; ++j)
        out.dataset.features(row, j) =
            spec.sigma > 0.0 ? proto[leaf](j) + rng.normal(0.0, spec.sigma)
                             : proto[leaf](j);
      out.dataset.terminals.push_back(terminal);
    }
  }
  out.dataset.assignment.assign(n, Subset::Train);
  return out;
}

}  // namespace hhar

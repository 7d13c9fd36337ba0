#pragma once

#include "hhar/hierarchy.hpp"
#include "hhar/rng.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hhar {

enum class Subset { Train = 0, Val = 1, Test = 2 };

/// Preprocessed feature vectors with terminal labels over one hierarchy,
/// plus a train/val/test assignment per example. Immutable after load;
/// synthetic and file-loaded datasets are the same type everywhere.
struct Dataset {
  LabelHierarchy hierarchy;
  Matrix features;                 // n x d, one row per example
  std::vector<Index> terminals;    // n terminal node indices
  std::vector<Subset> assignment;  // n; defaults to all-train

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  std::vector<Index> indices_of(Subset s) const;
  /// Binary target rows, one expand_label_set per listed example.
  Matrix targets(const std::vector<Index>& rows) const;
};

/// Reads a features CSV (header `f0,...,f{d-1},label`, one example per row,
/// last column the terminal label name) against a hierarchy edge file.
Dataset load_dataset(const std::string& features_path,
                     const std::string& hierarchy_path);

/// Writes the same two files back; loading them reproduces the dataset
/// exactly (values are emitted in shortest round-trip form).
void save_dataset(const Dataset& ds, const std::string& features_path,
                  const std::string& hierarchy_path);

/// Seeded stratified split by terminal label. Fractions must sum to one;
/// every class must have at least as many examples as there are nonzero
/// fractions, and each nonzero fraction receives at least one example per
/// class.
Dataset split(Dataset ds, const std::array<Real, 3>& fractions,
              std::uint64_t seed);

/// Synthetic hierarchical-activity generator: a full `branching`-ary tree of
/// the given depth with unit-sphere class prototypes built by root-to-leaf
/// random walks (child = rho * parent + (1 - rho) * fresh direction,
/// normalized), then per-leaf Gaussian feature noise.
struct SyntheticSpec {
  int depth = 2;
  int branching = 3;
  Index dim = 16;
  Real rho = 0.6;        // sibling correlation knob, [0, 1)
  Real sigma = 0.1;      // feature noise
  Index per_leaf = 100;  // samples per leaf
  std::uint64_t seed = 0;
};

SyntheticSpec load_synthetic_spec(const std::string& path);
void save_synthetic_spec(const SyntheticSpec& spec, const std::string& path);

struct SyntheticData {
  Dataset dataset;
  std::map<std::string, Vector> leaf_prototypes;  // for oracle checks
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace hhar

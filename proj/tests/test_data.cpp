#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hhar/data.hpp"

#include <cstdio>
#include <fstream>
#include <set>

using namespace hhar;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p, const std::string& content = "")
      : path(std::move(p)) {
    if (!content.empty()) {
      std::ofstream out(path, std::ios::binary);
      out << content;
    }
  }
  ~TempFile() { std::remove(path.c_str()); }
};

const std::string kFourNodeHierarchy =
    "root\tstill\nroot\twalking\nstill\tsitting\nstill\tstanding\n";

}  // namespace

TEST_CASE("csv smoke parse") {
  TempFile h("t_hier.txt", kFourNodeHierarchy);
  TempFile f("t_feat.csv",
             "f0,f1,f2,label\n"
             "0.5,1,-2.25,sitting\n"
             "1.5,0,3,walking\n");
  Dataset ds = load_dataset(f.path, h.path);
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 3);
  CHECK(ds.features(0, 2) == -2.25);
  CHECK(ds.hierarchy.name(ds.terminals[1]) == "walking");
  CHECK(ds.assignment == std::vector<Subset>{Subset::Train, Subset::Train});
}

TEST_CASE("csv validation errors carry the row number") {
  TempFile h("t_hier2.txt", kFourNodeHierarchy);
  {
    TempFile f("t_bad_label.csv", "f0,label\n1.0,sitting\n2.0,flying\n");
    CHECK_THROWS_WITH_AS(load_dataset(f.path, h.path),
                         "dataset: row 3: unknown label 'flying'",
                         std::invalid_argument);
  }
  {
    TempFile f("t_ragged.csv", "f0,f1,label\n1.0,2.0,sitting\n1.0,walking\n");
    CHECK_THROWS_WITH_AS(
        load_dataset(f.path, h.path),
        "dataset: row 3 has 2 fields, expected 3", std::invalid_argument);
  }
  {
    TempFile f("t_nan.csv", "f0,label\nabc,sitting\n");
    CHECK_THROWS_WITH_AS(load_dataset(f.path, h.path),
                         "dataset: row 2: bad number 'abc'",
                         std::invalid_argument);
  }
}

TEST_CASE("dataset save/load round-trips exactly") {
  SyntheticSpec spec;
  spec.depth = 2;
  spec.branching = 2;
  spec.dim = 5;
  spec.per_leaf = 7;
  spec.seed = 99;
  Dataset ds = generate_synthetic(spec).dataset;

  TempFile f("t_rt_feat.csv");
  TempFile h("t_rt_hier.txt");
  save_dataset(ds, f.path, h.path);
  Dataset back = load_dataset(f.path, h.path);
  CHECK(back.features == ds.features);  // bit-exact via round-trip formatting
  CHECK(back.terminals == ds.terminals);
  CHECK(back.hierarchy.names() == ds.hierarchy.names());

  TempFile f2("t_rt_feat2.csv");
  TempFile h2("t_rt_hier2.txt");
  save_dataset(back, f2.path, h2.path);
  std::ifstream a(f.path), b(f2.path);
  std::string sa((std::istreambuf_iterator<char>(a)),
                 std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)),
                 std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("target rows equal the terminal's expanded label set") {
  SyntheticSpec spec;
  spec.depth = 2;
  spec.branching = 3;
  spec.per_leaf = 2;
  Dataset ds = generate_synthetic(spec).dataset;
  std::vector<Index> all(ds.size());
  for (Index i = 0; i < ds.size(); ++i) all[i] = i;
  Matrix y = ds.targets(all);
  for (Index i = 0; i < ds.size(); ++i)
    CHECK(y.row(i).transpose() ==
          ds.hierarchy.expand_label_set(ds.terminals[i]));
}

TEST_CASE("degenerate split sends everything to train") {
  SyntheticSpec spec;
  spec.per_leaf = 5;
  Dataset ds = split(generate_synthetic(spec).dataset, {1.0, 0.0, 0.0}, 3);
  CHECK(ds.indices_of(Subset::Train).size() == static_cast<std::size_t>(ds.size()));
  CHECK(ds.indices_of(Subset::Val).empty());
  CHECK(ds.indices_of(Subset::Test).empty());
}

TEST_CASE("stratified split has exact per-class counts on exact fractions") {
  SyntheticSpec spec;
  spec.depth = 1;
  spec.branching = 4;
  spec.per_leaf = 100;
  Dataset ds = split(generate_synthetic(spec).dataset, {0.8, 0.1, 0.1}, 7);
  for (Index leaf = 0; leaf < ds.hierarchy.size(); ++leaf) {
    Index train = 0, val = 0, test = 0;
    for (Index i = 0; i < ds.size(); ++i) {
      if (ds.terminals[i] != leaf) continue;
      switch (ds.assignment[i]) {
        case Subset::Train: ++train; break;
        case Subset::Val: ++val; break;
        case Subset::Test: ++test; break;
      }
    }
    CHECK(train == 80);
    CHECK(val == 10);
    CHECK(test == 10);
  }
}

TEST_CASE("split is deterministic per seed and disjoint-covering") {
  SyntheticSpec spec;
  spec.per_leaf = 13;
  Dataset base = generate_synthetic(spec).dataset;
  Dataset a = split(base, {0.6, 0.2, 0.2}, 11);
  Dataset b = split(base, {0.6, 0.2, 0.2}, 11);
  CHECK(a.assignment == b.assignment);
  Dataset c = split(base, {0.6, 0.2, 0.2}, 12);
  CHECK(a.assignment != c.assignment);

  const auto train = a.indices_of(Subset::Train);
  const auto val = a.indices_of(Subset::Val);
  const auto test = a.indices_of(Subset::Test);
  CHECK(train.size() + val.size() + test.size() ==
        static_cast<std::size_t>(base.size()));
}

TEST_CASE("split rejects classes smaller than the nonzero split count") {
  SyntheticSpec spec;
  spec.depth = 1;
  spec.branching = 2;
  spec.per_leaf = 2;  // 2 examples per class, 3 nonzero fractions
  Dataset ds = generate_synthetic(spec).dataset;
  CHECK_THROWS_WITH_AS(split(ds, {0.4, 0.3, 0.3}, 1),
                       doctest::Contains("fewer than 3 nonzero splits"),
                       std::invalid_argument);
  CHECK_NOTHROW(split(ds, {0.5, 0.0, 0.5}, 1));
}

TEST_CASE("split rejects fractions not summing to one") {
  SyntheticSpec spec;
  Dataset ds = generate_synthetic(spec).dataset;
  CHECK_THROWS_AS(split(ds, {0.5, 0.2, 0.2}, 1), std::invalid_argument);
}

TEST_CASE("each nonzero fraction receives at least one example per class") {
  SyntheticSpec spec;
  spec.depth = 1;
  spec.branching = 2;
  spec.per_leaf = 3;
  Dataset ds = split(generate_synthetic(spec).dataset, {0.98, 0.01, 0.01}, 5);
  CHECK(!ds.indices_of(Subset::Val).empty());
  CHECK(!ds.indices_of(Subset::Test).empty());
}

TEST_CASE("zero noise collapses same-leaf examples onto the prototype") {
  SyntheticSpec spec;
  spec.sigma = 0.0;
  spec.per_leaf = 4;
  SyntheticData sd = generate_synthetic(spec);
  const Dataset& ds = sd.dataset;
  for (Index i = 1; i < ds.size(); ++i) {
    if (ds.terminals[i] == ds.terminals[0])
      CHECK(ds.features.row(i) == ds.features.row(0));
  }
  // And the value is the leaf prototype itself.
  const std::string leaf0 = ds.hierarchy.name(ds.terminals[0]);
  CHECK(ds.features.row(0).transpose() == sd.leaf_prototypes.at(leaf0));
}

TEST_CASE("synthetic hierarchy shape matches depth and branching") {
  SyntheticSpec spec;
  spec.depth = 2;
  spec.branching = 3;
  spec.per_leaf = 1;
  Dataset ds = generate_synthetic(spec).dataset;
  CHECK(ds.hierarchy.size() == 12);  // 3 + 9
  CHECK(ds.hierarchy.leaves().size() == 9);
  CHECK(ds.size() == 9);
}

TEST_CASE("sibling prototypes are closer than cross-parent prototypes at high rho") {
  Real within_sum = 0.0, cross_sum = 0.0;
  Index within_n = 0, cross_n = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSpec spec;
    spec.depth = 2;
    spec.branching = 3;
    spec.rho = 0.9;
    spec.per_leaf = 1;
    spec.seed = seed;
    SyntheticData sd = generate_synthetic(spec);
    const LabelHierarchy& h = sd.dataset.hierarchy;
    std::vector<std::string> leaf_names;
    std::vector<Index> leaf_parents;
    for (Index v : h.leaves()) {
      leaf_names.push_back(h.name(v));
      leaf_parents.push_back(h.parent(v));
    }
    for (std::size_t i = 0; i < leaf_names.size(); ++i) {
      for (std::size_t j = i + 1; j < leaf_names.size(); ++j) {
        const Real cos = sd.leaf_prototypes.at(leaf_names[i])
                             .dot(sd.leaf_prototypes.at(leaf_names[j]));
        if (leaf_parents[i] == leaf_parents[j]) {
          within_sum += cos;
          ++within_n;
        } else {
          cross_sum += cos;
          ++cross_n;
        }
      }
    }
  }
  CHECK(within_sum / within_n > cross_sum / cross_n);
}

TEST_CASE("nearest-prototype oracle is perfect at tiny noise") {
  SyntheticSpec spec;
  spec.sigma = 0.01;
  spec.rho = 0.3;
  spec.per_leaf = 10;
  spec.seed = 21;
  SyntheticData sd = generate_synthetic(spec);
  const Dataset& ds = sd.dataset;
  for (Index i = 0; i < ds.size(); ++i) {
    Real best = -1.0;
    std::string best_leaf;
    for (const auto& [leaf, proto] : sd.leaf_prototypes) {
      const Real d2 = (ds.features.row(i).transpose() - proto).squaredNorm();
      if (best < 0.0 || d2 < best) {
        best = d2;
        best_leaf = leaf;
      }
    }
    CHECK(best_leaf == ds.hierarchy.name(ds.terminals[i]));
  }
}

TEST_CASE("synthetic spec file round-trip") {
  SyntheticSpec spec;
  spec.depth = 3;
  spec.branching = 2;
  spec.dim = 9;
  spec.rho = 0.45;
  spec.sigma = 0.2;
  spec.per_leaf = 17;
  spec.seed = 1234;
  TempFile f("t_spec.cfg");
  save_synthetic_spec(spec, f.path);
  SyntheticSpec back = load_synthetic_spec(f.path);
  CHECK(back.depth == spec.depth);
  CHECK(back.branching == spec.branching);
  CHECK(back.dim == spec.dim);
  CHECK(back.rho == spec.rho);
  CHECK(back.sigma == spec.sigma);
  CHECK(back.per_leaf == spec.per_leaf);
  CHECK(back.seed == spec.seed);
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.rho = 1.0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec.rho = 0.5;
  spec.depth = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("synthetic generation is deterministic per seed") {
  SyntheticSpec spec;
  spec.per_leaf = 3;
  Dataset a = generate_synthetic(spec).dataset;
  Dataset b = generate_synthetic(spec).dataset;
  CHECK(a.features == b.features);
  CHECK(a.terminals == b.terminals);
}

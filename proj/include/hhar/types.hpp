#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace hhar {

using Real = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// Extents of a dense tensor, rank 1 to 3.
///
/// Storage convention: rank-1 (n) lives in an n x 1 matrix, rank-2 (r, c) in
/// an r x c matrix, and rank-3 (k, r, c) in a (k*r) x c matrix of k stacked
/// row blocks (slice i occupies rows [i*r, (i+1)*r)).
class Shape {
 public:
  Shape() = default;

  Shape(std::initializer_list<Index> dims) {
    if (dims.size() < 1 || dims.size() > 3) {
      throw std::invalid_argument("Shape: rank must be 1..3, got " +
                                  std::to_string(dims.size()));
    }
    rank_ = static_cast<int>(dims.size());
    int i = 0;
    for (Index d : dims) {
      if (d < 0) throw std::invalid_argument("Shape: negative extent");
      dims_[i++] = d;
    }
  }

  int rank() const { return rank_; }

  Index dim(int i) const {
    if (i < 0 || i >= rank_) throw std::out_of_range("Shape::dim");
    return dims_[static_cast<std::size_t>(i)];
  }

  Index size() const {
    Index n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[static_cast<std::size_t>(i)];
    return rank_ == 0 ? 0 : n;
  }

  Index storage_rows() const {
    switch (rank_) {
      case 1: return dims_[0];
      case 2: return dims_[0];
      case 3: return dims_[0] * dims_[1];
      default: return 0;
    }
  }

  Index storage_cols() const {
    switch (rank_) {
      case 1: return 1;
      case 2: return dims_[1];
      case 3: return dims_[2];
      default: return 0;
    }
  }

  bool operator==(const Shape& other) const {
    if (rank_ != other.rank_) return false;
    for (int i = 0; i < rank_; ++i) {
      if (dims_[static_cast<std::size_t>(i)] !=
          other.dims_[static_cast<std::size_t>(i)])
        return false;
    }
    return true;
  }
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string str() const {
    std::string s;
    for (int i = 0; i < rank_; ++i) {
      if (i) s += "x";
      s += std::to_string(dims_[static_cast<std::size_t>(i)]);
    }
    return s.empty() ? "<empty>" : s;
  }

 private:
  std::array<Index, 3> dims_{0, 0, 0};
  int rank_ = 0;
};

}  // namespace hhar

#pragma once

#include "hhar/rng.hpp"
#include "hhar/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hhar {

/// Trainable tensor with entries drawn uniformly from [-scale, +scale].
/// The same seed yields a bit-identical tensor.
Tensor init_uniform(const Shape& shape, Real scale, Rng& rng);

/// Weight matrix init, uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_weight(Index fan_in, Index fan_out, Rng& rng);

struct AdamOptions {
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

/// Named trainable parameters plus per-parameter Adam moment accumulators
/// and a step counter shared across all parameters.
class ParamStore {
 public:
  /// Registers a trainable leaf under a unique name; returns the same handle.
  Tensor add(const std::string& name, Tensor param);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;  // sorted
  std::size_t size() const { return slots_.size(); }
  std::int64_t steps() const { return step_; }

  void clear_grads();

  /// Invokes f(name, tensor) in name order.
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [name, slot] : slots_) f(name, slot.param);
  }

  friend void adam_step(ParamStore& store, Real lr, const AdamOptions& opts);

 private:
  struct Slot {
    Tensor param;
    Matrix m1;  // first moment
    Matrix m2;  // second moment
  };
  std::map<std::string, Slot> slots_;  // name order fixes iteration order
  std::int64_t step_ = 0;
};

/// One Adam update with bias correction over every parameter in the store.
/// Requires a populated gradient for each parameter and clears all gradients
/// afterwards.
void adam_step(ParamStore& store, Real lr, const AdamOptions& opts = {});

}  // namespace hhar

#include "hhar/param_store.hpp"

#include <cmath>
#include <stdexcept>

namespace hhar {

Tensor init_uniform(const Shape& shape, Real scale, Rng& rng) {
  if (!(scale > 0.0))
    throw std::invalid_argument("init_uniform: scale must be positive, got " +
                                std::to_string(scale));
  Matrix storage(shape.storage_rows(), shape.storage_cols());
  // Row-major fill so the draw order is independent of the storage layout.
  for (Index i = 0; i < storage.rows(); ++i)
    for (Index j = 0; j < storage.cols(); ++j)
      storage(i, j) = rng.uniform(-scale, scale);
  return Tensor::variable(shape, std::move(storage));
}

Tensor init_weight(Index fan_in, Index fan_out, Rng& rng) {
  if (fan_in <= 0 || fan_out <= 0)
    throw std::invalid_argument("init_weight: non-positive fan");
  return init_uniform(Shape{fan_in, fan_out},
                      1.0 / std::sqrt(static_cast<Real>(fan_in)), rng);
}

Tensor ParamStore::add(const std::string& name, Tensor param) {
  if (!param.defined())
    throw std::invalid_argument("ParamStore::add: undefined tensor for '" +
                                name + "'");
  if (!param.requires_grad())
    throw std::invalid_argument("ParamStore::add: '" + name +
                                "' is not trainable");
  auto [it, inserted] = slots_.emplace(
      name, Slot{std::move(param), Matrix(), Matrix()});
  if (!inserted)
    throw std::invalid_argument("ParamStore::add: duplicate parameter '" +
                                name + "'");
  const Matrix& v = it->second.param.value();
  it->second.m1 = Matrix::Zero(v.rows(), v.cols());
  it->second.m2 = Matrix::Zero(v.rows(), v.cols());
  return it->second.param;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end())
    throw std::invalid_argument("ParamStore::get: unknown parameter '" + name +
                                "'");
  return it->second.param;
}

bool ParamStore::contains(const std::string& name) const {
  return slots_.count(name) != 0;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

void ParamStore::clear_grads() {
  for (auto& [name, slot] : slots_) slot.param.clear_grad();
}

void adam_step(ParamStore& store, Real lr, const AdamOptions& opts) {
  for (const auto& [name, slot] : store.slots_) {
    if (!slot.param.has_grad())
      throw std::invalid_argument("adam_step: missing gradient for '" + name +
                                  "'");
  }
  const std::int64_t t = ++store.step_;
  const Real corr1 = 1.0 - std::pow(opts.beta1, static_cast<Real>(t));
  const Real corr2 = 1.0 - std::pow(opts.beta2, static_cast<Real>(t));
  for (auto& [name, slot] : store.slots_) {
    const Matrix& g = slot.param.grad();
    slot.m1 = opts.beta1 * slot.m1 + (1.0 - opts.beta1) * g;
    slot.m2 = (opts.beta2 * slot.m2.array() +
               (1.0 - opts.beta2) * g.array().square())
                  .matrix();
    auto m_hat = slot.m1.array() / corr1;
    auto v_hat = slot.m2.array() / corr2;
    slot.param.value_mut().array() -= lr * m_hat / (v_hat.sqrt() + opts.eps);
    slot.param.clear_grad();
  }
}

}  // namespace hhar

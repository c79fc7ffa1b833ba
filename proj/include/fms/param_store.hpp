#pragma once
// Named trainable tensors, their gradient accumulators, and Adam state.
// Iteration order is insertion order everywhere, which keeps optimizer
// updates and checkpoints deterministic.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fms/rng.hpp"
#include "fms/tape.hpp"
#include "fms/tensor.hpp"

namespace fms {

template <typename T>
class ParameterStore {
 public:
  Tensor<T>& create(const std::string& name, Shape shape) {
    if (index_.count(name)) throw std::runtime_error("parameter already exists: " + name);
    index_.emplace(name, names_.size());
    names_.push_back(name);
    params_.emplace_back(std::move(shape));
    return params_.back();
  }

  // Xavier/Glorot uniform for a [fan_in, fan_out] weight matrix.
  Tensor<T>& create_xavier(const std::string& name, int64_t fan_in, int64_t fan_out,
                           rng::SplitMix64& g) {
    Tensor<T>& t = create(name, {fan_in, fan_out});
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<T>((2.0 * rng::next_double(g) - 1.0) * bound);
    return t;
  }

  // Normal(0, 1/sqrt(dim)) rows, for relation embeddings.
  Tensor<T>& create_embedding(const std::string& name, int64_t rows, int64_t dim,
                              rng::SplitMix64& g) {
    Tensor<T>& t = create(name, {rows, dim});
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<T>(rng::next_normal(g) * sd);
    return t;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("no such parameter: " + name);
    return params_[it->second];
  }
  const Tensor<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("no such parameter: " + name);
    return params_[it->second];
  }

  size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  int64_t num_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
  }

  GradMap<T>& grads() { return grads_; }
  const GradMap<T>& grads() const { return grads_; }

  void zero_grads() { grads_.zero(); }

  // Sum of squared parameter norms (the explicit L2 loss term is
  // l2_weight * this value; its gradient is applied inside adam_step).
  double l2_norm_sq() const {
    double acc = 0;
    for (const auto& p : params_)
      for (int64_t i = 0; i < p.numel(); ++i) acc += static_cast<double>(p[i]) * p[i];
    return acc;
  }

  // Standard Adam with bias correction. l2_weight enters as the gradient of
  // the explicit penalty l2_weight*||theta||^2 (coupled, not decoupled
  // decay). Gradients are zeroed after the step; parameters with no
  // gradient entry are left untouched.
  void adam_step(T lr, T beta1, T beta2, T eps, T l2_weight) {
    ++step_;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(step_));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(step_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor<T>* gp = grads_.find(names_[pi]);
      Tensor<T>& p = params_[pi];
      if (moment1_.size() <= pi) {
        moment1_.emplace_back(Tensor<T>::zeros(p.shape()));
        moment2_.emplace_back(Tensor<T>::zeros(p.shape()));
      }
      Tensor<T>& m = moment1_[pi];
      Tensor<T>& v = moment2_[pi];
      const int64_t n = p.numel();
      for (int64_t i = 0; i < n; ++i) {
        T gr = (gp ? (*gp)[i] : T(0)) + T(2) * l2_weight * p[i];
        m[i] = beta1 * m[i] + (T(1) - beta1) * gr;
        v[i] = beta2 * v[i] + (T(1) - beta2) * gr * gr;
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
    grads_.zero();
  }

  int64_t adam_steps() const { return step_; }

  // Deep copy of parameter values only (no optimizer state), for best-model
  // snapshots and read-only evaluation clones.
  ParameterStore snapshot() const {
    ParameterStore out;
    out.names_ = names_;
    out.index_ = index_;
    out.params_ = params_;
    return out;
  }

  void assign_from(const ParameterStore& other) {
    if (other.names_ != names_) throw std::runtime_error("parameter set mismatch in assign_from");
    params_ = other.params_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<Tensor<T>> params_;
  GradMap<T> grads_;
  std::vector<Tensor<T>> moment1_, moment2_;
  int64_t step_ = 0;
};

using ParamStoref = ParameterStore<float>;
using ParamStored = ParameterStore<double>;

// Checkpoint file format (bit-exact, little-endian):
//   magic "FMS1"; u32 entry count; per entry: u16 name length, UTF-8 name,
//   u8 rank, rank x u32 dims, then product(dims) x f32 IEEE-754 values.
void save_checkpoint(const ParamStoref& store, const std::string& path);
ParamStoref load_checkpoint(const std::string& path);

}  // namespace fms

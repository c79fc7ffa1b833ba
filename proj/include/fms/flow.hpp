#pragma once
// Conditional flow matching between the two context messages of a query.
//
// Conditioned on z = (h*, t*), the probability path is a Gaussian around
// the linear interpolant:  x_t ~ N((1-t) h* + t t*, sigma^2 I),  and the
// target field is the constant  u(x|z) = t* - h*.  A small MLP regresses
// the field from (x_t, t); its output doubles as the modulation vector for
// the static score. The field target u is treated as regression data (no
// gradient flows through it); x_t stays on the tape so prediction loss can
// reach the messages through the modulation path.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fms/assignment.hpp"
#include "fms/param_store.hpp"
#include "fms/rng.hpp"
#include "fms/tape.hpp"

namespace fms {

enum class FlowCoupling { kPaired, kMinibatchOT };
enum class FlowInference { kMidpoint, kMcAverage };

[[noreturn]] inline void fail_pair(const char* op, const auto& a, const auto& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                   " and " + shape_str(b.shape()));
}

struct FlowConfig {
  double sigma = 0.1;
  FlowCoupling coupling = FlowCoupling::kPaired;
  FlowInference inference = FlowInference::kMidpoint;
  int mc_samples = 64;

  void validate() const {
    if (sigma < 0) throw std::invalid_argument("flow: sigma must be >= 0");
    if (mc_samples < 1) throw std::invalid_argument("flow: mc_samples must be >= 1");
  }
};

// Field network: MLP (d+1) -> d -> d, relu hidden, linear out. The scalar
// time is appended as a raw input column.
template <typename T>
void create_flow_params(ParameterStore<T>& store, int64_t dim, rng::SplitMix64& g) {
  store.create_xavier("flow.w1", dim + 1, dim, g);
  store.create("flow.b1", {dim});
  store.create_xavier("flow.w2", dim, dim, g);
  store.create("flow.b2", {dim});
}

// v(t, x) for a batch of rows; x is [n x d] on the tape, t is one scalar
// per row (plain data).
template <typename T>
typename Tape<T>::Id vector_field(Tape<T>& tape, const ParameterStore<T>& store,
                                  typename Tape<T>::Id x, const std::vector<T>& t) {
  const int64_t n = tape.value(x).dim(0);
  if (static_cast<int64_t>(t.size()) != n)
    throw ShapeError("vector_field: " + std::to_string(t.size()) + " times for " +
                     std::to_string(n) + " rows");
  Tensor<T> tcol({n, 1});
  for (int64_t i = 0; i < n; ++i) tcol[i] = t[static_cast<size_t>(i)];
  const auto input = tape.concat_cols(x, tape.constant(std::move(tcol)));
  const auto hidden = tape.relu(tape.add(tape.matmul(input, tape.param("flow.w1", store.get("flow.w1"))),
                                         tape.param("flow.b1", store.get("flow.b1"))));
  return tape.add(tape.matmul(hidden, tape.param("flow.w2", store.get("flow.w2"))),
                  tape.param("flow.b2", store.get("flow.b2")));
}

// (1-t) h* + t t*
template <typename T>
Tensor<T> path_point(const Tensor<T>& h, const Tensor<T>& t_star, T t) {
  if (h.shape() != t_star.shape()) fail_pair("path_point", h, t_star);
  Tensor<T> x(h.shape());
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = (T(1) - t) * h[i] + t * t_star[i];
  return x;
}

// One sample of the conditional path for a single condition z = (h*, t*).
template <typename T>
struct FlowSample {
  T t;
  Tensor<T> x;  // x_t
  Tensor<T> u;  // t* - h*, the target field (constant in t)
};

// Sample with a prescribed pseudo-time.
template <typename T>
FlowSample<T> sample_path_at(const Tensor<T>& h, const Tensor<T>& t_star, T t, T sigma,
                             rng::SplitMix64& g) {
  if (sigma < 0) throw std::invalid_argument("sample_path: sigma must be >= 0");
  FlowSample<T> s;
  s.t = t;
  s.x = path_point(h, t_star, t);
  if (sigma > 0) {
    for (int64_t i = 0; i < s.x.numel(); i += 2) {
      const auto [z0, z1] = rng::next_normal2(g);
      s.x[i] += sigma * static_cast<T>(z0);
      if (i + 1 < s.x.numel()) s.x[i + 1] += sigma * static_cast<T>(z1);
    }
  }
  s.u = Tensor<T>(h.shape());
  for (int64_t i = 0; i < s.u.numel(); ++i) s.u[i] = t_star[i] - h[i];
  return s;
}

// Sample with t ~ Uniform[0,1).
template <typename T>
FlowSample<T> sample_path(const Tensor<T>& h, const Tensor<T>& t_star, T sigma,
                          rng::SplitMix64& g) {
  return sample_path_at(h, t_star, static_cast<T>(rng::next_double(g)), sigma, g);
}

// One (t, noise) draw per row, from per-row substreams.
template <typename T>
struct FlowDraws {
  std::vector<T> t;       // n, uniform [0,1)
  Tensor<T> noise;        // [n x d], standard normal
};

template <typename T>
FlowDraws<T> draw_flow_samples(int64_t n, int64_t dim, const std::vector<uint64_t>& row_seeds) {
  if (static_cast<int64_t>(row_seeds.size()) != n)
    throw std::invalid_argument("draw_flow_samples: seed count mismatch");
  FlowDraws<T> d;
  d.t.resize(static_cast<size_t>(n));
  d.noise = Tensor<T>({n, dim});
  for (int64_t i = 0; i < n; ++i) {
    rng::SplitMix64 g(row_seeds[static_cast<size_t>(i)]);
    d.t[static_cast<size_t>(i)] = static_cast<T>(rng::next_double(g));
    for (int64_t j = 0; j < dim; j += 2) {
      const auto [z0, z1] = rng::next_normal2(g);
      d.noise[i * dim + j] = static_cast<T>(z0);
      if (j + 1 < dim) d.noise[i * dim + j + 1] = static_cast<T>(z1);
    }
  }
  return d;
}

// Minibatch optimal-transport re-pairing: the permutation assigning tail
// messages to head messages with minimum total squared euclidean cost.
// Exact Hungarian solution; capped because the O(n^3) solve is meant for
// minibatches, not datasets.
template <typename T>
std::vector<int64_t> ot_pair(const Tensor<T>& heads, const Tensor<T>& tails) {
  if (heads.rank() != 2 || heads.shape() != tails.shape())
    throw ShapeError("ot_pair: expected matching [n x d] matrices, got " +
                     shape_str(heads.shape()) + " and " + shape_str(tails.shape()));
  const int64_t n = heads.dim(0), d = heads.dim(1);
  if (n > 512)
    throw std::invalid_argument(
        "ot_pair: batch of " + std::to_string(n) +
        " exceeds the exact-assignment budget (512); use paired coupling");
  std::vector<double> cost(static_cast<size_t>(n * n));
  for (int64_t i = 0; i < n; ++i) {
    const T* hi = heads.data() + i * d;
    for (int64_t j = 0; j < n; ++j) {
      const T* tj = tails.data() + j * d;
      double acc = 0;
      for (int64_t c = 0; c < d; ++c) {
        const double diff = static_cast<double>(hi[c]) - static_cast<double>(tj[c]);
        acc += diff * diff;
      }
      cost[static_cast<size_t>(i * n + j)] = acc;
    }
  }
  return solve_assignment(cost, n);
}

template <typename T>
struct FlowForward {
  typename Tape<T>::Id x_t;       // [n x d] interpolant sample, on tape
  typename Tape<T>::Id field;     // [n x d] v(t, x_t)
  typename Tape<T>::Id u_target;  // [n x d] constant node, t* - h* at draw time
  typename Tape<T>::Id cfm_loss;  // scalar
  std::vector<T> t;               // the pseudo-time draws
};

// Training pass: draw (t, x_t, u) per row and regress the field. With OT
// coupling the tail side is re-paired first (affects the draws only; the
// caller's score path keeps its own pairing).
template <typename T>
FlowForward<T> flow_training_pass(Tape<T>& tape, const ParameterStore<T>& store,
                                  typename Tape<T>::Id head_msg,
                                  typename Tape<T>::Id tail_msg, const FlowConfig& cfg,
                                  const std::vector<uint64_t>& row_seeds) {
  cfg.validate();
  const Tensor<T>& H = tape.value(head_msg);
  const int64_t n = H.dim(0), d = H.dim(1);
  if (n == 0) throw ShapeError("flow_training_pass: empty batch");

  auto tail_used = tail_msg;
  if (cfg.coupling == FlowCoupling::kMinibatchOT) {
    const std::vector<int64_t> perm = ot_pair(tape.value(head_msg), tape.value(tail_msg));
    tail_used = tape.gather_rows(tail_msg, perm);
  }

  FlowDraws<T> draws = draw_flow_samples<T>(n, d, row_seeds);

  std::vector<T> one_minus_t(draws.t.size());
  for (size_t i = 0; i < draws.t.size(); ++i) one_minus_t[i] = T(1) - draws.t[i];

  typename Tape<T>::Id x_t = tape.add(tape.row_scale(head_msg, one_minus_t),
                                      tape.row_scale(tail_used, draws.t));
  if (cfg.sigma > 0) {
    Tensor<T> scaled = draws.noise;
    for (int64_t i = 0; i < scaled.numel(); ++i) scaled[i] *= static_cast<T>(cfg.sigma);
    x_t = tape.add(x_t, tape.constant(std::move(scaled)));
  }

  // Regression target u = t* - h*, detached: plain data for the field fit.
  const Tensor<T>& TV = tape.value(tail_used);
  const Tensor<T>& HV = tape.value(head_msg);
  Tensor<T> u({n, d});
  for (int64_t i = 0; i < n * d; ++i) u[i] = TV[i] - HV[i];

  FlowForward<T> out;
  out.x_t = x_t;
  out.t = draws.t;
  out.field = vector_field(tape, store, x_t, draws.t);
  out.u_target = tape.constant(std::move(u));
  out.cfm_loss = tape.squared_error(out.field, out.u_target);
  return out;
}

// Deterministic inference-time modulation vector(s).
//   midpoint:   v(1/2, (h*+t*)/2)
//   mc_average: mean over S draws of v(t, x_t) with the training
//               distribution, substreams keyed by (seed, sample index)
template <typename T>
typename Tape<T>::Id modulation_vector(Tape<T>& tape, const ParameterStore<T>& store,
                                       typename Tape<T>::Id head_msg,
                                       typename Tape<T>::Id tail_msg, const FlowConfig& cfg,
                                       uint64_t seed) {
  cfg.validate();
  const int64_t n = tape.value(head_msg).dim(0);
  const int64_t d = tape.value(head_msg).dim(1);

  if (cfg.inference == FlowInference::kMidpoint) {
    const auto mid = tape.scale(tape.add(head_msg, tail_msg), T(0.5));
    return vector_field(tape, store, mid, std::vector<T>(static_cast<size_t>(n), T(0.5)));
  }

  typename Tape<T>::Id acc = -1;
  for (int s = 0; s < cfg.mc_samples; ++s) {
    std::vector<uint64_t> seeds(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      seeds[static_cast<size_t>(i)] =
          rng::mix(seed, static_cast<uint64_t>(s), static_cast<uint64_t>(i));
    FlowDraws<T> draws = draw_flow_samples<T>(n, d, seeds);
    std::vector<T> omt(draws.t.size());
    for (size_t i = 0; i < draws.t.size(); ++i) omt[i] = T(1) - draws.t[i];
    auto x = tape.add(tape.row_scale(head_msg, omt), tape.row_scale(tail_msg, draws.t));
    if (cfg.sigma > 0) {
      Tensor<T> scaled = draws.noise;
      for (int64_t i = 0; i < scaled.numel(); ++i) scaled[i] *= static_cast<T>(cfg.sigma);
      x = tape.add(x, tape.constant(std::move(scaled)));
    }
    const auto v = vector_field(tape, store, x, draws.t);
    acc = (s == 0) ? v : tape.add(acc, v);
  }
  return tape.scale(acc, T(1) / static_cast<T>(cfg.mc_samples));
}

}  // namespace fms

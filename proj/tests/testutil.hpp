#pragma once
// Shared test helpers: random tensors, a central finite-difference gradient
// checker (64-bit), toy graph builders and a scratch directory.

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fms/dataset.hpp"
#include "fms/param_store.hpp"
#include "fms/rng.hpp"
#include "fms/tape.hpp"
#include "fms/tensor.hpp"

namespace testutil {

inline fms::Tensord random_tensor(fms::Shape shape, fms::rng::SplitMix64& g, double scale = 1.0) {
  fms::Tensord t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = (2.0 * fms::rng::next_double(g) - 1.0) * scale;
  return t;
}

// Largest mixed absolute/relative gradient error between reverse mode and
// central differences, over every element of every parameter in the store.
// `forward` must rebuild the graph from the store each call and return the
// scalar loss value.
inline double max_grad_error(fms::ParameterStore<double>& store,
                             const std::function<double()>& forward_value,
                             const std::function<void(fms::GradMap<double>&)>& backward,
                             double eps = 1e-5) {
  fms::GradMap<double> grads;
  backward(grads);
  double worst = 0;
  for (const auto& name : store.names()) {
    fms::Tensord& p = store.get(name);
    const fms::Tensord* g = grads.find(name);
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double keep = p[i];
      p[i] = keep + eps;
      const double up = forward_value();
      p[i] = keep - eps;
      const double down = forward_value();
      p[i] = keep;
      const double fd = (up - down) / (2 * eps);
      const double bw = g ? (*g)[i] : 0.0;
      const double err = std::abs(fd - bw) / std::max({1.0, std::abs(fd), std::abs(bw)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Convenience wrapper: builds the loss on a fresh tape both for values and
// for the reverse pass.
inline double check_gradients(fms::ParameterStore<double>& store,
                              const std::function<fms::Taped::Id(fms::Taped&)>& build,
                              double eps = 1e-5) {
  auto forward_value = [&]() {
    fms::Taped tape;
    return tape.value(build(tape)).item();
  };
  auto backward = [&](fms::GradMap<double>& grads) {
    fms::Taped tape;
    const auto loss = build(tape);
    tape.backward(loss, grads);
  };
  return max_grad_error(store, forward_value, backward, eps);
}

inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fms_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  os << content;
}

// A small 3-relation knowledge graph with enough regular structure for a
// model to overfit: relation 0 links hub 0 to satellites, relation 1 chains
// satellites, relation 2 closes triangles back to the hub.
inline std::vector<fms::Triple> toy_triples(int n_sat = 10) {
  std::vector<fms::Triple> t;
  for (int i = 1; i <= n_sat; ++i) {
    t.push_back({0, 0, i});
    t.push_back({i, 1, i % n_sat + 1});
    if (i % 2 == 0) t.push_back({i, 2, 0});
  }
  return t;
}

}  // namespace testutil

#pragma once

// Central finite differences against the tape's analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "scriptenc/autodiff.hpp"
#include "scriptenc/rng.hpp"

namespace gradcheck {

using scriptenc::ad::Tensor;

struct Report {
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros (e.g. a ReLU
// in its flat region) from turning rounding noise into huge ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// `loss` rebuilds the scalar from the current values of `inputs`.
inline Report check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs, double h = 1e-5) {
  scriptenc::ad::backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.size(), 0.0);
  }
  Report r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto v = inputs[k].mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + h;
      const double up = loss().item();
      v[i] = keep - h;
      const double down = loss().item();
      v[i] = keep;
      const double numeric = (up - down) / (2 * h);
      r.max_rel = std::max(r.max_rel, relative_error(analytic[k][i], numeric));
      r.max_abs = std::max(r.max_abs, std::abs(analytic[k][i] - numeric));
      ++r.checked;
    }
  }
  return r;
}

inline std::vector<double> random_values(scriptenc::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Tensor random_param(scriptenc::Rng& rng, scriptenc::ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = scriptenc::ad::shape_size(shape);
  return Tensor::parameter(std::move(shape), random_values(rng, n, lo, hi));
}

// Reduces any tensor to a scalar through fixed random weights, so every
// output element contributes a distinct coefficient.
inline Tensor project(const Tensor& out, std::uint64_t seed = 99) {
  scriptenc::Rng rng(seed);
  auto w = Tensor::constant(out.shape(), random_values(rng, out.size(), 0.5, 1.5));
  return scriptenc::ad::sum(scriptenc::ad::mul(out, w));
}

}  // namespace gradcheck

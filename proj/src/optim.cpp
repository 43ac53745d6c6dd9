#include "scriptenc/optim.hpp"

#include <cmath>

#include "scriptenc/error.hpp"

namespace scriptenc::optim {

void zero_grad(std::span<ad::Tensor> params) {
  for (auto& p : params)
    for (double& g : p.mutable_grad()) g = 0.0;
}

double clip_grad_norm(std::span<ad::Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params)
      for (double& g : p.mutable_grad()) g *= factor;
  }
  return norm;
}

AdamState make_adam_state(std::span<const ad::Tensor> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::span<ad::Tensor> params) {
  if (params.size() != state.m.size()) throw Error("ShapeMismatch", "adam_step: parameter count differs from state");
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].mutable_value();
    auto grad = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != value.size()) throw Error("ShapeMismatch", "adam_step: moment shape differs from parameter");
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace scriptenc::optim

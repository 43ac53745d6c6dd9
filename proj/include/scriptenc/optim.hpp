#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scriptenc/autodiff.hpp"

namespace scriptenc::optim {

// Clears gradients, including those of parameters a backward pass did not
// reach (their stale values would otherwise leak into the next step).
void zero_grad(std::span<ad::Tensor> params);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping; gradients are untouched when it is
// already within bounds.
double clip_grad_norm(std::span<ad::Tensor> params, double max_norm = 5.0);

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(std::span<const ad::Tensor> params, AdamConfig config = {});

// One bias-corrected Adam update. Parameters without a populated gradient
// are treated as having a zero gradient.
void adam_step(AdamState& state, std::span<ad::Tensor> params);

}  // namespace scriptenc::optim

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scriptenc/autodiff.hpp"
#include "scriptenc/rng.hpp"

namespace scriptenc::nn {

using ad::Tensor;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered registry of trainable tensors. Registration order is the
// serialization order.
class ParameterStore {
 public:
  Tensor add(const std::string& name, ad::Shape shape, std::vector<double> values);
  Tensor glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);
  Tensor zeros(const std::string& name, ad::Shape shape);

  const std::vector<NamedTensor>& named() const { return params_; }
  std::vector<Tensor> tensors() const;
  const Tensor& get(const std::string& name) const;
  std::size_t count() const;  // total scalar count

  // Deep copies of every value array, for best-checkpoint retention.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<NamedTensor> params_;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
std::vector<double> glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return ad::add(ad::matvec(weight, x), bias); }
  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

// One direction of a GRU:
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r * h) + b_h)
//   h' = (1 - z) * h + z * h~
struct GruCell {
  Tensor w_z, w_r, w_h;  // [hidden x input]
  Tensor u_z, u_r, u_h;  // [hidden x hidden]
  Tensor b_z, b_r, b_h;  // [hidden]

  static GruCell create(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                        Rng& rng);
  Tensor step(const Tensor& x, const Tensor& h_prev) const;
  // Same update built from primitive ops; reference for the fused step.
  Tensor step_composed(const Tensor& x, const Tensor& h_prev) const;
  std::size_t input_dim() const { return w_z.cols(); }
  std::size_t hidden_dim() const { return w_z.rows(); }
};

// Bidirectional GRU. Output c_t = [forward h_t ; backward h_t].
struct BiGru {
  GruCell forward;
  GruCell backward;

  static BiGru create(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                      Rng& rng);
  // Throws EmptySequence for an empty input.
  std::vector<Tensor> run(const std::vector<Tensor>& inputs) const;
  std::size_t output_dim() const { return 2 * forward.hidden_dim(); }
};

}  // namespace scriptenc::nn

#include "scriptenc/nn.hpp"

#include <cmath>

#include "scriptenc/error.hpp"

namespace scriptenc::nn {

Tensor ParameterStore::add(const std::string& name, ad::Shape shape, std::vector<double> values) {
  for (const auto& p : params_) {
    if (p.name == name) throw Error("DuplicateParameter", "parameter '" + name + "' registered twice");
  }
  auto t = Tensor::parameter(std::move(shape), std::move(values));
  params_.push_back({name, t});
  return t;
}

Tensor ParameterStore::glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  return add(name, {rows, cols}, glorot_uniform(rows, cols, rng));
}

Tensor ParameterStore::zeros(const std::string& name, ad::Shape shape) {
  const auto n = ad::shape_size(shape);
  return add(name, std::move(shape), std::vector<double>(n, 0.0));
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw Error("UnknownParameter", "no parameter named '" + name + "'");
}

std::size_t ParameterStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

std::vector<std::vector<double>> ParameterStore::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.tensor.value().begin(), p.tensor.value().end());
  return out;
}

void ParameterStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) throw Error("ShapeMismatch", "restore: parameter count differs");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_value();
    if (dst.size() != values[i].size()) {
      throw Error("ShapeMismatch", "restore: size of '" + params_[i].name + "' differs");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::vector<double> glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return v;
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = store.glorot(name + ".weight", out, in, rng);
  l.bias = store.zeros(name + ".bias", {out});
  return l;
}

GruCell GruCell::create(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                        Rng& rng) {
  GruCell c;
  c.w_z = store.glorot(name + ".w_z", hidden, input, rng);
  c.w_r = store.glorot(name + ".w_r", hidden, input, rng);
  c.w_h = store.glorot(name + ".w_h", hidden, input, rng);
  c.u_z = store.glorot(name + ".u_z", hidden, hidden, rng);
  c.u_r = store.glorot(name + ".u_r", hidden, hidden, rng);
  c.u_h = store.glorot(name + ".u_h", hidden, hidden, rng);
  c.b_z = store.zeros(name + ".b_z", {hidden});
  c.b_r = store.zeros(name + ".b_r", {hidden});
  c.b_h = store.zeros(name + ".b_h", {hidden});
  return c;
}

Tensor GruCell::step(const Tensor& x, const Tensor& h_prev) const {
  return ad::gru_step(x, h_prev, {w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h});
}

Tensor GruCell::step_composed(const Tensor& x, const Tensor& h_prev) const {
  using namespace ad;
  auto z = sigmoid(matvec(w_z, x) + matvec(u_z, h_prev) + b_z);
  auto r = sigmoid(matvec(w_r, x) + matvec(u_r, h_prev) + b_r);
  auto candidate = ad::tanh(matvec(w_h, x) + matvec(u_h, r * h_prev) + b_h);
  // (1 - z) * h + z * h~  ==  h + z * (h~ - h)
  return h_prev + z * (candidate - h_prev);
}

BiGru BiGru::create(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
                    Rng& rng) {
  BiGru g;
  g.forward = GruCell::create(store, name + ".fwd", input, hidden, rng);
  g.backward = GruCell::create(store, name + ".bwd", input, hidden, rng);
  return g;
}

std::vector<Tensor> BiGru::run(const std::vector<Tensor>& inputs) const {
  if (inputs.empty()) throw Error("EmptySequence", "bi_gru: sequence of length 0");
  const std::size_t steps = inputs.size();
  const std::size_t hidden = forward.hidden_dim();
  std::vector<Tensor> fwd(steps), bwd(steps);
  Tensor h = Tensor::zeros({hidden});
  for (std::size_t t = 0; t < steps; ++t) {
    h = forward.step(inputs[t], h);
    fwd[t] = h;
  }
  h = Tensor::zeros({hidden});
  for (std::size_t t = steps; t-- > 0;) {
    h = backward.step(inputs[t], h);
    bwd[t] = h;
  }
  std::vector<Tensor> out(steps);
  for (std::size_t t = 0; t < steps; ++t) out[t] = ad::concat({fwd[t], bwd[t]});
  return out;
}

}  // namespace scriptenc::nn

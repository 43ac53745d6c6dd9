#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// A Tensor is a cheap handle onto a graph node. Operations on tensors that
// require gradients record their parents and a backward closure; Tape walks
// that graph in reverse topological order to accumulate gradients.
// Tensors are rank 0 (scalar), rank 1 (vector) or rank 2 (row-major matrix).

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scriptenc::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  std::span<const double> value() const { return node_->value; }
  std::span<double> mutable_value() { return node_->value; }
  // Empty until a backward pass has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();

  double item() const;
  double at(std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  // Same values, no history.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>, const char*,
                            std::function<void(detail::Node&)>);
  std::shared_ptr<detail::Node> node_;
};

// Builds an op result. Parents and the backward closure are kept only when
// at least one parent requires gradients.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   const char* op, std::function<void(detail::Node&)> backward);

// Reverse topological record of the graph reachable from a scalar root.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  // Zeroes every gradient on the tape, seeds d(root)=1 and propagates.
  void backward();

  std::size_t size() const { return order_.size(); }

 private:
  Tensor root_;
  std::vector<detail::Node*> order_;  // parents before children
};

void backward(const Tensor& root);

// ---- primitives --------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_n(const std::vector<Tensor>& terms);   // equal shapes, summed elementwise
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor dot(const Tensor& a, const Tensor& b);

Tensor matvec(const Tensor& m, const Tensor& x);   // [r x c] * [c] -> [r]
Tensor vecmat(const Tensor& x, const Tensor& m);   // [r] * [r x c] -> [c]
Tensor matmul(const Tensor& a, const Tensor& b);   // [m x k] * [k x n] -> [m x n]
Tensor transpose(const Tensor& m);

Tensor concat(const std::vector<Tensor>& parts);   // vectors -> vector
Tensor stack(const std::vector<Tensor>& rows);     // equal-length vectors -> matrix
Tensor slice(const Tensor& v, std::size_t offset, std::size_t length);
Tensor row(const Tensor& m, std::size_t r);
Tensor gather_rows(const Tensor& m, std::span<const std::size_t> ids);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mean_rows(const Tensor& m);                 // [T x n] -> [n]

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);
Tensor softmax(const Tensor& v);
// v / sum(v); throws DegenerateNormalizer when |sum(v)| < 1e-9.
Tensor sum_normalize(const Tensor& v);
Tensor frobenius_norm(const Tensor& m);

// Fused GRU update, one node instead of ~17:
//   z = s(W_z x + U_z h + b_z), r = s(W_r x + U_r h + b_r)
//   c = tanh(W_h x + U_h (r * h) + b_h), h' = h + z * (c - h)
// p = {W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h}.
Tensor gru_step(const Tensor& x, const Tensor& h, const std::array<Tensor, 9>& p);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace scriptenc::ad

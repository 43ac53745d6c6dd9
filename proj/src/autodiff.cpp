#include "scriptenc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "scriptenc/error.hpp"

namespace scriptenc::ad {

using detail::Node;

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw Error("ShapeMismatch",
              std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw Error("ShapeMismatch", std::string(op) + ": expected rank " + std::to_string(rank) +
                                     " operand, got " + shape_string(t.shape()));
  }
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

inline bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

std::shared_ptr<Node> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw Error("ShapeMismatch", "tensor: " + std::to_string(values.size()) +
                                     " values do not fill shape " + shape_string(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw Error("ShapeMismatch", "tensor: zero-sized dimension in " + shape_string(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

// ---- Tensor -------------------------------------------------------------

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_size(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::scalar(double v) { return Tensor(new_node({}, {v}, false)); }

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(new_node({n}, std::move(values), false));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape()[1];
  if (rank() == 1) return shape()[0];
  return 1;
}

std::span<double> Tensor::mutable_grad() {
  if (node_->grad.size() != node_->value.size()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw Error("ShapeMismatch", "item: tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->value[0];
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents, const char* op,
                   std::function<void(Node&)> backward) {
  const bool req = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  auto n = new_node(std::move(shape), std::move(value), req);
  n->op = op;
  if (req) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.shared());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

// ---- Tape ---------------------------------------------------------------

Tape::Tape(const Tensor& root) : root_(root) {
  if (!root.defined() || root.size() != 1) {
    throw Error("ShapeMismatch", "backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void Tape::backward() {
  if (order_.empty()) return;
  for (Node* n : order_) n->grad.assign(n->value.size(), 0.0);
  order_.back()->grad[0] = 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

void backward(const Tensor& root) { Tape(root).backward(); }

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, "add", [](Node& self) {
    for (auto& p : self.parents) {
      if (!wants(p)) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, "sub", [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (wants(pa)) pa->grad[i] += self.grad[i];
      if (wants(pb)) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {a, b}, "mul", [](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (wants(pa)) pa->grad[i] += self.grad[i] * pb->value[i];
      if (wants(pb)) pb->grad[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.at(i);
  return make_result(a.shape(), std::move(out), {a}, "scale", [c](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += c * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + c;
  return make_result(a.shape(), std::move(out), {a}, "add_scalar", [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

Tensor add_n(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw Error("ShapeMismatch", "add_n: no operands");
  std::vector<double> out(terms.front().size(), 0.0);
  for (const auto& t : terms) {
    require_same("add_n", terms.front(), t);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.at(i);
  }
  return make_result(terms.front().shape(), std::move(out), terms, "add_n", [](Node& self) {
    for (auto& p : self.parents) {
      if (!wants(p)) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_rank("dot", a, 1);
  require_same("dot", a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i) * b.at(i);
  return make_result({}, {s}, {a, b}, "dot", [](Node& self) {
    const double g = self.grad[0];
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (std::size_t i = 0; i < pa->value.size(); ++i) {
      if (wants(pa)) pa->grad[i] += g * pb->value[i];
      if (wants(pb)) pb->grad[i] += g * pa->value[i];
    }
  });
}

// ---- linear algebra ---------------------------------------------------------

Tensor matvec(const Tensor& m, const Tensor& x) {
  require_rank("matvec", m, 2);
  require_rank("matvec", x, 1);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  if (x.size() != c) shape_mismatch("matvec", m.shape(), x.shape());
  std::vector<double> out(r);
  const double* mv = m.value().data();
  const double* xv = x.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* mr = mv + i * c;
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += mr[j] * xv[j];
    out[i] = s;
  }
  return make_result({r}, std::move(out), {m, x}, "matvec", [r, c](Node& self) {
    auto& pm = self.parents[0];
    auto& px = self.parents[1];
    const double* g = self.grad.data();
    if (wants(pm)) {
      double* gm = pm->grad.data();
      const double* xv = px->value.data();
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = g[i];
        double* gr = gm + i * c;
        for (std::size_t j = 0; j < c; ++j) gr[j] += gi * xv[j];
      }
    }
    if (wants(px)) {
      double* gx = px->grad.data();
      const double* mv = pm->value.data();
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = g[i];
        const double* mr = mv + i * c;
        for (std::size_t j = 0; j < c; ++j) gx[j] += gi * mr[j];
      }
    }
  });
}

Tensor vecmat(const Tensor& x, const Tensor& m) {
  require_rank("vecmat", m, 2);
  require_rank("vecmat", x, 1);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  if (x.size() != r) shape_mismatch("vecmat", x.shape(), m.shape());
  std::vector<double> out(c, 0.0);
  const double* mv = m.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    const double xi = x.at(i);
    const double* mr = mv + i * c;
    for (std::size_t j = 0; j < c; ++j) out[j] += xi * mr[j];
  }
  return make_result({c}, std::move(out), {x, m}, "vecmat", [r, c](Node& self) {
    auto& px = self.parents[0];
    auto& pm = self.parents[1];
    const double* g = self.grad.data();
    for (std::size_t i = 0; i < r; ++i) {
      const double* mr = pm->value.data() + i * c;
      if (wants(px)) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += g[j] * mr[j];
        px->grad[i] += s;
      }
      if (wants(pm)) {
        const double xi = px->value[i];
        double* gr = pm->grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) gr[j] += xi * g[j];
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_mismatch("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.at(i * k + p);
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * b.at(p * n + j);
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double ga = 0.0;
        const double aip = pa->value[i * k + p];
        for (std::size_t j = 0; j < n; ++j) {
          const double g = self.grad[i * n + j];
          ga += g * pb->value[p * n + j];
          if (wants(pb)) pb->grad[p * n + j] += aip * g;
        }
        if (wants(pa)) pa->grad[i * k + p] += ga;
      }
    }
  });
}

Tensor transpose(const Tensor& m) {
  require_rank("transpose", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m.at(i * c + j);
  return make_result({c, r}, std::move(out), {m}, "transpose", [r, c](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p->grad[i * c + j] += self.grad[j * r + i];
  });
}

// ---- structure --------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error("ShapeMismatch", "concat: no operands");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_rank("concat", p, 1);
    offsets.push_back(out.size());
    out.insert(out.end(), p.value().begin(), p.value().end());
  }
  const auto n = out.size();
  return make_result({n}, std::move(out), parts, "concat", [offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = self.parents[k];
      if (!wants(p)) continue;
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[offsets[k] + i];
    }
  });
}

Tensor stack(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw Error("ShapeMismatch", "stack: no operands");
  const std::size_t n = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (const auto& r : rows) {
    require_rank("stack", r, 1);
    if (r.size() != n) shape_mismatch("stack", rows.front().shape(), r.shape());
    out.insert(out.end(), r.value().begin(), r.value().end());
  }
  return make_result({rows.size(), n}, std::move(out), rows, "stack", [n](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = self.parents[k];
      if (!wants(p)) continue;
      for (std::size_t i = 0; i < n; ++i) p->grad[i] += self.grad[k * n + i];
    }
  });
}

Tensor slice(const Tensor& v, std::size_t offset, std::size_t length) {
  require_rank("slice", v, 1);
  if (offset + length > v.size() || length == 0) {
    throw Error("ShapeMismatch", "slice: range [" + std::to_string(offset) + ", " +
                                     std::to_string(offset + length) + ") outside " + shape_string(v.shape()));
  }
  std::vector<double> out(v.value().begin() + offset, v.value().begin() + offset + length);
  return make_result({length}, std::move(out), {v}, "slice", [offset](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[offset + i] += self.grad[i];
  });
}

Tensor row(const Tensor& m, std::size_t r) {
  require_rank("row", m, 2);
  const std::size_t c = m.shape()[1];
  if (r >= m.shape()[0]) throw Error("ShapeMismatch", "row: index " + std::to_string(r) + " outside " + shape_string(m.shape()));
  std::vector<double> out(m.value().begin() + r * c, m.value().begin() + (r + 1) * c);
  return make_result({c}, std::move(out), {m}, "row", [r, c](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t j = 0; j < c; ++j) p->grad[r * c + j] += self.grad[j];
  });
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> ids) {
  require_rank("gather_rows", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  if (ids.empty()) throw Error("ShapeMismatch", "gather_rows: no indices");
  std::vector<double> out;
  out.reserve(ids.size() * c);
  for (auto id : ids) {
    if (id >= r) throw Error("ShapeMismatch", "gather_rows: index " + std::to_string(id) + " outside " + shape_string(m.shape()));
    out.insert(out.end(), m.value().begin() + id * c, m.value().begin() + (id + 1) * c);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return make_result({idx.size(), c}, std::move(out), {m}, "gather_rows", [idx, c](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < c; ++j) p->grad[idx[k] * c + j] += self.grad[k * c + j];
  });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  return make_result({}, {s}, {a}, "sum", [](Node& self) {
    auto& p = self.parents[0];
    for (auto& g : p->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  double s = 0.0;
  for (double v : a.value()) s += v;
  return make_result({}, {s * inv}, {a}, "mean", [inv](Node& self) {
    auto& p = self.parents[0];
    for (auto& g : p->grad) g += self.grad[0] * inv;
  });
}

Tensor mean_rows(const Tensor& m) {
  require_rank("mean_rows", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  const double inv = 1.0 / static_cast<double>(r);
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += m.at(i * c + j);
  for (auto& v : out) v *= inv;
  return make_result({c}, std::move(out), {m}, "mean_rows", [r, c, inv](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p->grad[i * c + j] += self.grad[j] * inv;
  });
}

// ---- nonlinearities -----------------------------------------------------------

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(a.at(i));
  return make_result(a.shape(), std::move(out), {a}, "sigmoid", [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      p->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.at(i));
  return make_result(a.shape(), std::move(out), {a}, "tanh", [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double t = self.value[i];
      p->grad[i] += self.grad[i] * (1.0 - t * t);
    }
  });
}

namespace {

// y[i] = sum_j m[i*c + j] * x[j]
void matvec_into(const double* m, const double* x, std::size_t r, std::size_t c, double* y) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* mr = m + i * c;
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t j = 0;
    for (; j + 4 <= c; j += 4) {
      s0 += mr[j] * x[j];
      s1 += mr[j + 1] * x[j + 1];
      s2 += mr[j + 2] * x[j + 2];
      s3 += mr[j + 3] * x[j + 3];
    }
    for (; j < c; ++j) s0 += mr[j] * x[j];
    y[i] += (s0 + s1) + (s2 + s3);
  }
}

// y[j] += sum_i g[i] * m[i*c + j]
void vecmat_into(const double* g, const double* m, std::size_t r, std::size_t c, double* y) {
  for (std::size_t i = 0; i < r; ++i) {
    const double gi = g[i];
    const double* mr = m + i * c;
    for (std::size_t j = 0; j < c; ++j) y[j] += gi * mr[j];
  }
}

// m[i*c + j] += g[i] * x[j]
void outer_into(const double* g, const double* x, std::size_t r, std::size_t c, double* m) {
  for (std::size_t i = 0; i < r; ++i) {
    const double gi = g[i];
    double* mr = m + i * c;
    for (std::size_t j = 0; j < c; ++j) mr[j] += gi * x[j];
  }
}

}  // namespace

Tensor gru_step(const Tensor& x, const Tensor& h, const std::array<Tensor, 9>& p) {
  require_rank("gru_step", x, 1);
  require_rank("gru_step", h, 1);
  const std::size_t H = h.size(), I = x.size();
  for (std::size_t k = 0; k < 3; ++k) {
    if (p[k].shape() != Shape{H, I}) shape_mismatch("gru_step", p[k].shape(), Shape{H, I});
    if (p[k + 3].shape() != Shape{H, H}) shape_mismatch("gru_step", p[k + 3].shape(), Shape{H, H});
    if (p[k + 6].shape() != Shape{H}) shape_mismatch("gru_step", p[k + 6].shape(), Shape{H});
  }
  const double* xv = x.value().data();
  const double* hv = h.value().data();
  std::vector<double> z(p[6].value().begin(), p[6].value().end());
  std::vector<double> r(p[7].value().begin(), p[7].value().end());
  std::vector<double> c(p[8].value().begin(), p[8].value().end());
  matvec_into(p[0].value().data(), xv, H, I, z.data());
  matvec_into(p[3].value().data(), hv, H, H, z.data());
  matvec_into(p[1].value().data(), xv, H, I, r.data());
  matvec_into(p[4].value().data(), hv, H, H, r.data());
  std::vector<double> rh(H);
  for (std::size_t i = 0; i < H; ++i) {
    z[i] = stable_sigmoid(z[i]);
    r[i] = stable_sigmoid(r[i]);
    rh[i] = r[i] * hv[i];
  }
  matvec_into(p[2].value().data(), xv, H, I, c.data());
  matvec_into(p[5].value().data(), rh.data(), H, H, c.data());
  std::vector<double> out(H);
  for (std::size_t i = 0; i < H; ++i) {
    c[i] = std::tanh(c[i]);
    out[i] = hv[i] + z[i] * (c[i] - hv[i]);
  }
  std::vector<Tensor> parents{x, h};
  parents.insert(parents.end(), p.begin(), p.end());
  return make_result({H}, std::move(out), std::move(parents), "gru_step",
                     [H, I, z = std::move(z), r = std::move(r), c = std::move(c), rh = std::move(rh)](Node& self) {
                       auto& px = self.parents[0];
                       auto& ph = self.parents[1];
                       auto P = [&](std::size_t k) -> Node& { return *self.parents[2 + k]; };
                       const double* g = self.grad.data();
                       const double* xv = px->value.data();
                       const double* hv = ph->value.data();
                       std::vector<double> da_z(H), da_r(H), da_c(H), dh(H, 0.0), drh(H, 0.0);
                       for (std::size_t i = 0; i < H; ++i) {
                         da_z[i] = g[i] * (c[i] - hv[i]) * z[i] * (1.0 - z[i]);
                         da_c[i] = g[i] * z[i] * (1.0 - c[i] * c[i]);
                         dh[i] = g[i] * (1.0 - z[i]);
                       }
                       vecmat_into(da_c.data(), P(5).value.data(), H, H, drh.data());
                       for (std::size_t i = 0; i < H; ++i) {
                         dh[i] += drh[i] * r[i];
                         da_r[i] = drh[i] * hv[i] * r[i] * (1.0 - r[i]);
                       }
                       const double* da[3] = {da_z.data(), da_r.data(), da_c.data()};
                       for (std::size_t k = 0; k < 3; ++k) {
                         if (P(k).requires_grad) outer_into(da[k], xv, H, I, P(k).grad.data());
                         if (P(k + 3).requires_grad) outer_into(da[k], k == 2 ? rh.data() : hv, H, H, P(k + 3).grad.data());
                         if (P(k + 6).requires_grad)
                           for (std::size_t i = 0; i < H; ++i) P(k + 6).grad[i] += da[k][i];
                         if (px->requires_grad) vecmat_into(da[k], P(k).value.data(), H, I, px->grad.data());
                       }
                       if (ph->requires_grad) {
                         vecmat_into(da_z.data(), P(3).value.data(), H, H, dh.data());
                         vecmat_into(da_r.data(), P(4).value.data(), H, H, dh.data());
                         for (std::size_t i = 0; i < H; ++i) ph->grad[i] += dh[i];
                       }
                     });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) > 0.0 ? a.at(i) : 0.0;
  return make_result(a.shape(), std::move(out), {a}, "relu", [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (p->value[i] > 0.0) p->grad[i] += self.grad[i];
  });
}

// log(sigmoid(x)) = -log1p(exp(-x)), evaluated without overflow.
Tensor log_sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.at(i);
    out[i] = x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }
  return make_result(a.shape(), std::move(out), {a}, "log_sigmoid", [](Node& self) {
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p->grad[i] += self.grad[i] * (1.0 - stable_sigmoid(p->value[i]));
  });
}

Tensor softmax(const Tensor& v) {
  require_rank("softmax", v, 1);
  const double mx = *std::max_element(v.value().begin(), v.value().end());
  std::vector<double> out(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(v.at(i) - mx);
    z += out[i];
  }
  for (auto& o : out) o /= z;
  return make_result(v.shape(), std::move(out), {v}, "softmax", [](Node& self) {
    auto& p = self.parents[0];
    double gy = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gy += self.grad[i] * self.value[i];
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      p->grad[i] += self.value[i] * (self.grad[i] - gy);
  });
}

Tensor sum_normalize(const Tensor& v) {
  require_rank("sum_normalize", v, 1);
  double s = 0.0;
  for (double x : v.value()) s += x;
  if (std::fabs(s) < 1e-9) {
    throw Error("DegenerateNormalizer", "sum_normalize: |sum| = " + std::to_string(std::fabs(s)) + " < 1e-9");
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.at(i) / s;
  return make_result(v.shape(), std::move(out), {v}, "sum_normalize", [s](Node& self) {
    // y_i = v_i / s  =>  dL/dv_k = (g_k - sum_i g_i y_i) / s
    auto& p = self.parents[0];
    double gy = 0.0;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gy += self.grad[i] * self.value[i];
    for (std::size_t k = 0; k < self.grad.size(); ++k) p->grad[k] += (self.grad[k] - gy) / s;
  });
}

Tensor frobenius_norm(const Tensor& m) {
  double s = 0.0;
  for (double v : m.value()) s += v * v;
  const double norm = std::sqrt(s);
  return make_result({}, {norm}, {m}, "frobenius_norm", [norm](Node& self) {
    if (norm == 0.0) return;  // subgradient 0 at the origin
    auto& p = self.parents[0];
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0] * p->value[i] / norm;
  });
}

}  // namespace scriptenc::ad

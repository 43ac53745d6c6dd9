#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "scriptenc/autodiff.hpp"
#include "scriptenc/error.hpp"
#include "scriptenc/nn.hpp"
#include "scriptenc/optim.hpp"

using namespace scriptenc;
using ad::Tensor;

namespace {

constexpr double kPrimitiveTol = 1e-6;

void expect_fd(const std::function<Tensor()>& loss, std::vector<Tensor> inputs, double tol = kPrimitiveTol) {
  const auto r = gradcheck::check(loss, std::move(inputs));
  CHECK(r.checked > 0);
  CHECK(r.max_rel < tol);
}

}  // namespace

TEST_CASE("softmax of equal scores is uniform") {
  auto s = ad::softmax(Tensor::vector({0, 0, 0}));
  for (double v : s.value()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("sigmoid(0) is one half") { CHECK(ad::sigmoid(Tensor::scalar(0)).item() == 0.5); }

TEST_CASE("primitive gradients match central differences") {
  Rng rng(1);
  auto a = gradcheck::random_param(rng, {4});
  auto b = gradcheck::random_param(rng, {4});
  auto m = gradcheck::random_param(rng, {3, 4});
  auto n = gradcheck::random_param(rng, {4, 2});
  auto s = gradcheck::random_param(rng, {});
  using gradcheck::project;

  SUBCASE("add sub mul") {
    expect_fd([&] { return project(ad::add(a, b)); }, {a, b});
    expect_fd([&] { return project(ad::sub(a, b)); }, {a, b});
    expect_fd([&] { return project(ad::mul(a, b)); }, {a, b});
    expect_fd([&] { return project(ad::mul(m, m)); }, {m});
  }
  SUBCASE("add_n scale add_scalar") {
    expect_fd([&] { return project(ad::add_n({a, b, a})); }, {a, b});
    expect_fd([&] { return ad::add_n({ad::dot(a, b), s, s}); }, {a, b, s});
    expect_fd([&] { return project(ad::scale(a, -2.5)); }, {a});
    expect_fd([&] { return project(ad::add_scalar(m, 0.3)); }, {m});
  }
  SUBCASE("products") {
    expect_fd([&] { return ad::dot(a, b); }, {a, b});
    expect_fd([&] { return project(ad::matvec(m, a)); }, {m, a});
    auto c = gradcheck::random_param(rng, {3});
    expect_fd([&] { return project(ad::vecmat(c, m)); }, {c, m});
    expect_fd([&] { return project(ad::matmul(m, n)); }, {m, n});
    expect_fd([&] { return project(ad::transpose(m)); }, {m});
  }
  SUBCASE("reshaping") {
    expect_fd([&] { return project(ad::concat({a, b, a})); }, {a, b});
    expect_fd([&] { return project(ad::stack({a, b, a})); }, {a, b});
    expect_fd([&] { return project(ad::slice(a, 1, 2)); }, {a});
    expect_fd([&] { return project(ad::row(m, 2)); }, {m});
    const std::vector<std::size_t> ids{2, 0, 2};
    expect_fd([&] { return project(ad::gather_rows(m, ids)); }, {m});
  }
  SUBCASE("reductions") {
    expect_fd([&] { return ad::sum(m); }, {m});
    expect_fd([&] { return ad::mean(ad::mul(a, a)); }, {a});
    expect_fd([&] { return project(ad::mean_rows(m)); }, {m});
    expect_fd([&] { return ad::frobenius_norm(m); }, {m});
  }
  SUBCASE("nonlinearities") {
    expect_fd([&] { return project(ad::sigmoid(a)); }, {a});
    expect_fd([&] { return project(ad::tanh(m)); }, {m});
    expect_fd([&] { return project(ad::log_sigmoid(a)); }, {a});
    expect_fd([&] { return project(ad::softmax(a)); }, {a});
    auto pos = gradcheck::random_param(rng, {5}, 0.2, 1.0);
    expect_fd([&] { return project(ad::sum_normalize(pos)); }, {pos});
    // Keep relu away from its kink.
    auto away = Tensor::parameter({4}, {-0.7, 0.4, -0.2, 0.9});
    expect_fd([&] { return project(ad::relu(away)); }, {away});
  }
}

TEST_CASE("log_sigmoid stays finite for large magnitudes") {
  auto v = ad::log_sigmoid(Tensor::vector({-800, 800}));
  CHECK(v.at(0) == doctest::Approx(-800));
  CHECK(v.at(1) == 0.0);
}

TEST_CASE("shape errors carry a code") {
  try {
    ad::add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3}));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == "ShapeMismatch");
  }
  CHECK_THROWS_AS(ad::sum_normalize(Tensor::vector({1, -1})), Error);
}

TEST_CASE("a second backward pass does not accumulate onto the first") {
  auto x = Tensor::parameter({2}, {1, 2});
  auto loss = ad::dot(x, x);
  ad::backward(loss);
  ad::backward(loss);
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("fused GRU step equals the composed reference") {
  Rng rng(5);
  nn::ParameterStore store;
  auto cell = nn::GruCell::create(store, "g", 3, 4, rng);
  for (auto& t : store.tensors()) {
    auto v = t.mutable_value();
    for (auto& x : v) x = rng.uniform(-0.8, 0.8);
  }
  auto x = gradcheck::random_param(rng, {3});
  auto h = gradcheck::random_param(rng, {4});
  auto fused = cell.step(x, h);
  auto composed = cell.step_composed(x, h);
  for (std::size_t i = 0; i < 4; ++i) CHECK(fused.at(i) == doctest::Approx(composed.at(i)).epsilon(1e-13));

  std::vector<Tensor> inputs = store.tensors();
  inputs.push_back(x);
  inputs.push_back(h);
  ad::backward(gradcheck::project(cell.step_composed(x, h)));
  std::vector<std::vector<double>> reference;
  for (auto& t : inputs) reference.emplace_back(t.grad().begin(), t.grad().end());
  ad::backward(gradcheck::project(cell.step(x, h)));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < reference[k].size(); ++i) {
      CHECK(inputs[k].grad()[i] == doctest::Approx(reference[k][i]).epsilon(1e-12));
    }
  }
  expect_fd([&] { return gradcheck::project(cell.step(x, h)); }, inputs);
}

TEST_CASE("zero GRU parameters keep a zero state at zero") {
  Rng rng(2);
  nn::ParameterStore store;
  auto cell = nn::GruCell::create(store, "g", 3, 2, rng);
  for (auto& t : store.tensors())
    for (auto& v : t.mutable_value()) v = 0.0;
  auto h = cell.step(Tensor::vector({0.3, -2.0, 5.0}), Tensor::zeros({2}));
  CHECK(h.at(0) == 0.0);
  CHECK(h.at(1) == 0.0);
}

TEST_CASE("bidirectional GRU: 50 units per direction give 100-dim outputs") {
  Rng rng(3);
  nn::ParameterStore store;
  auto gru = nn::BiGru::create(store, "bi", 100, 50, rng);
  auto out = gru.run({Tensor::zeros({100})});
  REQUIRE(out.size() == 1);
  CHECK(out[0].size() == 100);
  CHECK_THROWS_AS(gru.run({}), Error);
}

TEST_CASE("bidirectional GRU gradient of summed outputs") {
  Rng rng(4);
  nn::ParameterStore store;
  auto gru = nn::BiGru::create(store, "bi", 3, 2, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 3; ++t) xs.push_back(gradcheck::random_param(rng, {3}));
  auto loss = [&] { return ad::sum(ad::stack(gru.run(xs))); };
  auto inputs = store.tensors();
  inputs.insert(inputs.end(), xs.begin(), xs.end());
  const auto r = gradcheck::check(loss, inputs);
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("gradient clipping") {
  auto p = Tensor::parameter({2}, {0, 0});
  std::vector<Tensor> params{p};
  auto set_grad = [&](double a, double b) {
    auto g = p.mutable_grad();
    g[0] = a;
    g[1] = b;
  };
  set_grad(3, 4);
  CHECK(optim::clip_grad_norm(params, 5) == doctest::Approx(5));
  CHECK(p.grad()[0] == 3);
  CHECK(p.grad()[1] == 4);
  set_grad(6, 8);
  CHECK(optim::clip_grad_norm(params, 5) == doctest::Approx(10));
  CHECK(p.grad()[0] == doctest::Approx(3));
  CHECK(p.grad()[1] == doctest::Approx(4));
  set_grad(0, 0);
  CHECK(optim::clip_grad_norm(params, 5) == 0);
  CHECK(p.grad()[0] == 0);
}

TEST_CASE("Adam first step moves by about lr against the gradient") {
  auto p = Tensor::parameter({2}, {1.0, -1.0});
  std::vector<Tensor> params{p};
  auto state = optim::make_adam_state(params);
  auto g = p.mutable_grad();
  g[0] = 0.3;
  g[1] = -7.0;
  optim::adam_step(state, params);
  // m_hat = g, v_hat = g^2 on the first step, so the update is lr * g / (|g| + eps).
  CHECK(p.at(0) == doctest::Approx(1.0 - 5e-3 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(-1.0 + 5e-3 * 7.0 / (7.0 + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 1);
}

TEST_CASE("Adam with zero gradient leaves the parameter and advances the step") {
  auto p = Tensor::parameter({1}, {2.0});
  std::vector<Tensor> params{p};
  auto state = optim::make_adam_state(params);
  optim::zero_grad(params);
  optim::adam_step(state, params);
  CHECK(p.at(0) == 2.0);
  CHECK(state.step == 1);
}

TEST_CASE("Adam is deterministic given identical state") {
  auto run = [] {
    auto p = Tensor::parameter({3}, {0.1, 0.2, 0.3});
    std::vector<Tensor> params{p};
    auto state = optim::make_adam_state(params);
    for (int i = 0; i < 2; ++i) {
      ad::backward(ad::dot(p, p));
      optim::adam_step(state, params);
    }
    return std::vector<double>(p.value().begin(), p.value().end());
  };
  CHECK(run() == run());
}

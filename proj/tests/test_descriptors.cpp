#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "scriptenc/descriptors.hpp"
#include "scriptenc/error.hpp"

using namespace scriptenc;
using namespace scriptenc::descriptors;
using ad::Tensor;

namespace {

PredictorConfig predictor_config(bool recurrent, double alpha = 0.5) {
  PredictorConfig c;
  c.input_dim = 4;
  c.k = 3;
  c.hidden = 5;
  c.recurrent = recurrent;
  c.alpha = alpha;
  return c;
}

double simplex_error(const Tensor& o) {
  double s = 0;
  for (double v : o.value()) s += v;
  return std::abs(s - 1);
}

}  // namespace

TEST_CASE("predictor outputs lie on the simplex") {
  Rng rng(1);
  nn::ParameterStore store;
  auto ff = Predictor::create(store, "ff", predictor_config(false), rng);
  auto rec = Predictor::create(store, "rec", predictor_config(true), rng);
  Tensor o = uniform_weights(3);
  for (int t = 0; t < 5; ++t) {
    auto v = Tensor::vector(gradcheck::random_values(rng, 4, -3, 3));
    auto a = ff(v, Tensor());
    o = rec(v, o);
    for (const auto& x : {a, o}) {
      CHECK(simplex_error(x) < 1e-12);
      CHECK(*std::min_element(x.value().begin(), x.value().end()) >= 0.0);
    }
  }
}

TEST_CASE("recurrent step mixes the feed-forward output with the previous weights") {
  Rng rng(2);
  nn::ParameterStore store;
  auto rec = Predictor::create(store, "rec", predictor_config(true, 0.3), rng);
  auto v = Tensor::vector({0.2, -0.4, 1.0, 0.5});
  auto prev = Tensor::vector({0.2, 0.5, 0.3});
  auto f = rec.ffnn(ad::concat({v, prev}));
  auto o = rec(v, prev);
  for (std::size_t j = 0; j < 3; ++j) CHECK(o.at(j) == doctest::Approx(0.7 * f.at(j) + 0.3 * prev.at(j)));
}

TEST_CASE("alpha = 1 freezes the weights") {
  Rng rng(3);
  nn::ParameterStore store;
  auto rec = Predictor::create(store, "rec", predictor_config(true, 1.0), rng);
  auto prev = Tensor::vector({0.6, 0.1, 0.3});
  auto o = rec(Tensor::vector({9, -9, 9, -9}), prev);
  for (std::size_t j = 0; j < 3; ++j) CHECK(o.at(j) == doctest::Approx(prev.at(j)));
}

TEST_CASE("reconstruction w = R^T o") {
  Rng rng(4);
  auto vals = gradcheck::random_values(rng, 3 * 2);
  auto R = Tensor::constant({3, 2}, vals);
  auto one_hot = reconstruct(Tensor::vector({0, 1, 0}), R);
  CHECK(one_hot.at(0) == vals[2]);
  CHECK(one_hot.at(1) == vals[3]);
  auto mean = reconstruct(uniform_weights(3), R);
  CHECK(mean.at(0) == doctest::Approx((vals[0] + vals[2] + vals[4]) / 3));
  std::vector<double> o{0.2, 0.5, 0.3};
  auto w = reconstruct(Tensor::vector(o), R);
  for (std::size_t d = 0; d < 2; ++d) {
    double direct = 0;
    for (std::size_t i = 0; i < 3; ++i) direct += o[i] * vals[i * 2 + d];
    CHECK(w.at(d) == doctest::Approx(direct).epsilon(1e-14));
  }
}

TEST_CASE("hinge and orthogonality terms") {
  auto R = Tensor::constant({2, 3}, {1, 0, 0, 0, 1, 0});
  CHECK(orthogonality_penalty(R).item() == doctest::Approx(0.0));
  auto w = Tensor::vector({2, 0, 0});
  auto u = Tensor::vector({1, 0, 0});
  std::vector<Tensor> far{Tensor::vector({0, 1, 0}), Tensor::vector({-1, 0, 0})};
  CHECK(descriptor_loss(w, u, far, R).item() == doctest::Approx(0.0));

  Rng rng(5);
  auto wv = gradcheck::random_values(rng, 3), uv = gradcheck::random_values(rng, 3);
  auto rv = gradcheck::random_values(rng, 6);
  std::vector<std::vector<double>> negs{gradcheck::random_values(rng, 3), gradcheck::random_values(rng, 3),
                                        gradcheck::random_values(rng, 3)};
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  double hinge = 0;
  for (const auto& n : negs) hinge += std::max(0.0, 1 - dot(wv, uv) + dot(wv, n));
  double frob = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double g = 0;
      for (int d = 0; d < 3; ++d) g += rv[i * 3 + d] * rv[j * 3 + d];
      g -= (i == j);
      frob += g * g;
    }
  std::vector<Tensor> nt;
  for (const auto& n : negs) nt.push_back(Tensor::vector(n));
  auto loss = descriptor_loss(Tensor::vector(wv), Tensor::vector(uv), nt, Tensor::constant({2, 3}, rv), 10.0);
  CHECK(loss.item() == doctest::Approx(hinge + 10 * std::sqrt(frob)).epsilon(1e-13));
}

TEST_CASE("descriptor loss gradients through the predictor and R") {
  Rng rng(6);
  nn::ParameterStore store;
  auto pred = Predictor::create(store, "p", predictor_config(true), rng);
  auto R = store.add("R", {3, 4}, gradcheck::random_values(rng, 12));
  auto v1 = Tensor::vector(gradcheck::random_values(rng, 4));
  auto v2 = Tensor::vector(gradcheck::random_values(rng, 4));
  auto u = Tensor::vector(gradcheck::random_values(rng, 4));
  std::vector<Tensor> negs{Tensor::vector(gradcheck::random_values(rng, 4)),
                           Tensor::vector(gradcheck::random_values(rng, 4))};
  auto loss = [&] {
    auto o1 = pred(v1, uniform_weights(3));
    auto o2 = pred(v2, o1);
    return ad::add(descriptor_loss(reconstruct(o1, R), u, negs, R, 10.0),
                   hinge_loss(reconstruct(o2, R), u, negs));
  };
  auto r = gradcheck::check(loss, store.tensors());
  CHECK(r.max_rel < 1e-4);
}

TEST_CASE("k-means") {
  Rng rng(7);
  SUBCASE("k equal to the number of distinct points returns the points") {
    std::vector<std::vector<double>> pts{{0, 0}, {5, 5}, {-3, 2}, {5, 5}};
    auto c = kmeans(pts, 3, rng);
    std::set<std::vector<double>> got;
    for (int i = 0; i < 3; ++i) got.insert({c[i * 2], c[i * 2 + 1]});
    CHECK(got == std::set<std::vector<double>>{{0, 0}, {5, 5}, {-3, 2}});
  }
  SUBCASE("two planted clusters are recovered") {
    std::vector<std::vector<double>> pts;
    double sum_a[2] = {0, 0}, sum_b[2] = {0, 0};
    for (int i = 0; i < 20; ++i) {
      std::vector<double> a{10 + rng.uniform(-1, 1), rng.uniform(-1, 1)};
      std::vector<double> b{-10 + rng.uniform(-1, 1), rng.uniform(-1, 1)};
      sum_a[0] += a[0], sum_a[1] += a[1], sum_b[0] += b[0], sum_b[1] += b[1];
      pts.push_back(a);
      pts.push_back(b);
    }
    auto c = kmeans(pts, 2, rng);
    const int ia = c[0] > 0 ? 0 : 1, ib = 1 - ia;
    CHECK(c[ia * 2] == doctest::Approx(sum_a[0] / 20).epsilon(1e-12));
    CHECK(c[ia * 2 + 1] == doctest::Approx(sum_a[1] / 20).epsilon(1e-12));
    CHECK(c[ib * 2] == doctest::Approx(sum_b[0] / 20).epsilon(1e-12));
  }
  SUBCASE("fewer points than clusters") {
    try {
      kmeans({{1, 2}}, 2, rng);
      FAIL("expected InsufficientVocab");
    } catch (const Error& e) {
      CHECK(e.code() == "InsufficientVocab");
    }
  }
}

TEST_CASE("Glorot initialization stays within its limit") {
  std::vector<std::vector<double>> emb(10, std::vector<double>(8, 0.0));
  auto R = init_descriptors(InitMode::RandomGlorot, emb, 5, 3);
  REQUIRE(R.size() == 40);
  const double limit = std::sqrt(6.0 / (5 + 8));
  for (double v : R) CHECK(std::abs(v) <= limit);
}

TEST_CASE("nearest words by cosine") {
  std::vector<std::string> tokens{"b", "a", "c"};
  std::vector<std::vector<double>> emb{{1, 0}, {1, 0}, {0, 1}};
  SUBCASE("ties go to the smaller token") {
    std::vector<double> R{2, 0};
    auto w = nearest_words(R, 1, tokens, emb, 3);
    CHECK(w[0] == std::vector<std::string>{"a", "b", "c"});
  }
  SUBCASE("a row equal to a word embedding ranks it first") {
    std::vector<double> R{0, 1, 1, 0};
    auto w = nearest_words(R, 2, tokens, emb, 1);
    CHECK(w[0] == std::vector<std::string>{"c"});
    CHECK(w[1] == std::vector<std::string>{"a"});
  }
  SUBCASE("m = 0") {
    std::vector<double> R{1, 1};
    CHECK(nearest_words(R, 1, tokens, emb, 0)[0].empty());
  }
}

TEST_CASE("semantic coherence") {
  SUBCASE("always together") {
    auto idx = CooccurrenceIndex::build({{"x", "y"}, {"x", "y", "z"}, {"z"}});
    CHECK(semantic_coherence(std::vector<std::string>{"x", "y"}, idx) == doctest::Approx(std::log(3.0 / 2)));
  }
  SUBCASE("never together") {
    auto idx = CooccurrenceIndex::build({{"x"}, {"y"}, {"x"}, {"y"}});
    CHECK(semantic_coherence(std::vector<std::string>{"x", "y"}, idx) == doctest::Approx(std::log(1.0 / 2)));
  }
  SUBCASE("three words over five documents, counted by hand") {
    auto idx = CooccurrenceIndex::build(
        {{"gun", "car", "bank"}, {"gun", "bank"}, {"car"}, {"gun", "car"}, {"love", "bank", "car"}});
    // D(gun)=3 D(car)=4 D(bank)=3; D(car,gun)=2 D(bank,gun)=2 D(bank,car)=2
    const double expected = std::log(3.0 / 3) + std::log(3.0 / 3) + std::log(3.0 / 4);
    CHECK(semantic_coherence(std::vector<std::string>{"gun", "car", "bank"}, idx) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(idx.co_df("bank", "car") == 2);
  }
  SUBCASE("unseen word") {
    auto idx = CooccurrenceIndex::build({{"x"}});
    CHECK_THROWS_AS(semantic_coherence(std::vector<std::string>{"q", "x"}, idx), Error);
  }
}

TEST_CASE("descriptor vocabulary keeps widespread words below the most frequent") {
  std::vector<std::vector<std::string>> movies{{"the", "the", "gun", "car"}, {"the", "gun", "kiss"}, {"the", "gun"}};
  CHECK(descriptor_vocabulary(movies, 2, 1) == std::vector<std::string>{"gun"});
  CHECK(descriptor_vocabulary(movies, 1, 0) == std::vector<std::string>{"car", "gun", "kiss", "the"});
}

TEST_CASE("descriptor training keeps weights on the simplex") {
  Rng rng(9);
  std::vector<ScriptScenes> data(3);
  for (auto& s : data)
    for (int t = 0; t < 4; ++t) {
      s.v.push_back(gradcheck::random_values(rng, 4));
      s.u.push_back(gradcheck::random_values(rng, 4));
    }
  data.push_back({{gradcheck::random_values(rng, 4)}, {gradcheck::random_values(rng, 4)}});
  DescriptorConfig cfg;
  cfg.k = 3;
  cfg.hidden = 6;
  cfg.epochs = 3;
  cfg.negatives = 5;
  DescriptorModel m(cfg, 4, 4, gradcheck::random_values(rng, 12));
  auto stats = train_descriptors(m, data);
  CHECK(stats.max_simplex_error < 1e-9);
  CHECK(stats.min_weight >= -1e-12);
  CHECK(stats.skipped_scripts == 1);  // the one-scene script, counted once
  CHECK(stats.reduced_negative_scripts > 0);
  CHECK(stats.epoch_loss.size() == 3);
}

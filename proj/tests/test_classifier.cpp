#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "scriptenc/classifier.hpp"
#include "scriptenc/error.hpp"

using namespace scriptenc;
using namespace scriptenc::classifier;
using ad::Tensor;

namespace {

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

TagTaxonomy all_active(std::size_t L) {
  TagTaxonomy t;
  t.attribute = "a";
  for (std::size_t j = 0; j < L; ++j) t.tags.push_back("t" + std::to_string(j));
  t.ratios.assign(L, 1.0);
  t.active.assign(L, true);
  return t;
}

encoders::EncodedScript toy_script() {
  encoders::EncodedScript s;
  s.title = "toy";
  for (int k = 0; k < 2; ++k) {
    encoders::EncodedScene sc;
    sc.action = {{1, 2, 3}, {2}};
    sc.dialogue = {{4, 1}};
    sc.all = {{1, 2, 3}, {2}, {4, 1}};
    s.scenes.push_back(sc);
  }
  return s;
}

encoders::ModelConfig toy_config() {
  encoders::ModelConfig c;
  c.encoder.input_dim = 4;
  c.encoder.hidden_per_direction = 3;
  c.encoder.attention_dim = c.encoder.attended_dim();
  return c;
}

Tensor toy_words() {
  Rng rng(31);
  return Tensor::constant({5, 4}, gradcheck::random_values(rng, 20));
}

}  // namespace

TEST_CASE("loss at z = 0 is ln 2") {
  const std::vector<bool> on{true};
  CHECK(reweighted_loss(Tensor::vector({0}), std::vector<double>{1}, std::vector<double>{1}, on).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(reweighted_loss(Tensor::vector({0}), std::vector<double>{0}, std::vector<double>{1}, on).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss gradient matches central differences") {
  Rng rng(2);
  auto z = gradcheck::random_param(rng, {3, 4}, -2, 2);
  std::vector<double> y{1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 0};
  std::vector<double> ratios{0.5, 2.0, 1.0, 0.25};
  std::vector<bool> active{true, true, true, true};
  for (auto form : {LossForm::Weighted, LossForm::Printed}) {
    auto r = gradcheck::check([&] { return reweighted_loss(z, y, ratios, active, form); }, {z});
    CHECK(r.max_rel < 1e-6);
  }
}

TEST_CASE("unit ratios reduce the loss to mean binary cross-entropy") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(4), l = 1 + rng.below(5);
    auto z = gradcheck::random_values(rng, n * l, -4, 4);
    std::vector<double> y(n * l);
    for (auto& v : y) v = rng.bernoulli(0.5) ? 1 : 0;
    double bce = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = 1 / (1 + std::exp(-z[i]));
      bce -= y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p);
    }
    bce /= static_cast<double>(z.size());
    const auto loss = reweighted_loss(Tensor::constant({n, l}, z), y, std::vector<double>(l, 1.0),
                                      std::vector<bool>(l, true));
    CHECK(std::abs(loss.item() - bce) < 1e-12);
  }
}

TEST_CASE("inactive tags drop out of the loss") {
  const std::vector<double> y{1, 0};
  const std::vector<double> ratios{1, 1};
  auto both = reweighted_loss(Tensor::vector({0.3, 5.0}), y, ratios, {true, false});
  auto one = reweighted_loss(Tensor::vector({0.3}), std::vector<double>{1}, std::vector<double>{1}, {true});
  CHECK(both.item() == doctest::Approx(one.item()).epsilon(1e-15));
  CHECK(code_of([&] { reweighted_loss(Tensor::vector({0.3, 5.0}), y, ratios, {false, false}); }) == "NoActiveTags");
}

TEST_CASE("loss parts add up to the weighted loss") {
  const std::vector<double> z{0.4, -1.2, 2.0}, y{1, 0, 0}, ratios{0.5, 2, 1};
  const std::vector<bool> on{true, true, true};
  auto parts = reweighted_loss_parts(z, y, ratios, on);
  CHECK(parts.positive + parts.negative ==
        doctest::Approx(reweighted_loss(Tensor::vector(z), y, ratios, on).item()).epsilon(1e-14));
}

TEST_CASE("taxonomy ratios are positives over negatives on training rows") {
  LabelMatrix y(4, 2);
  y.set(0, 0, true);
  y.set(1, 0, true);
  y.set(2, 0, true);
  y.set(3, 1, true);
  const std::vector<std::size_t> rows{0, 1, 2};
  auto t = TagTaxonomy::build("genre", {"a", "b"}, y, rows);
  CHECK_FALSE(t.active[0]);  // no negative among the training rows
  CHECK_FALSE(t.active[1]);  // no positive among the training rows
  const std::vector<std::size_t> all{0, 1, 2, 3};
  auto u = TagTaxonomy::build("genre", {"a", "b"}, y, all);
  CHECK(u.ratios[0] == 3.0);
  CHECK(u.ratios[1] == doctest::Approx(1.0 / 3));
  CHECK(u.active_count() == 2);
}

TEST_CASE("thresholded prediction is strict") {
  CHECK(predict_tags(std::vector<double>{2, -2}) == std::vector<std::uint8_t>{1, 0});
  CHECK(predict_tags(std::vector<double>{0, 0}) == std::vector<std::uint8_t>{0, 0});
}

TEST_CASE("average precision") {
  CHECK(average_precision(std::vector<double>{0.9, 0.1, 0.8}, std::vector<double>{1, 0, 1}) == 1.0);
  CHECK(average_precision(std::vector<double>{1, 0, 1, 0}, std::vector<double>{1, 0, 1, 0}) == 1.0);
  CHECK(average_precision(std::vector<double>{0.9, 0.8, 0.7}, std::vector<double>{1, 0, 1}) ==
        doctest::Approx((1 + 2.0 / 3) / 2).epsilon(1e-15));
  CHECK(code_of([] { average_precision(std::vector<double>{0.1}, std::vector<double>{0}); }) == "NoPositives");
}

TEST_CASE("a random head produces one logit per tag") {
  TagModel m(toy_config(), toy_words(), 1, 7, 3);
  CHECK(m.logits(toy_script()).size() == 7);
}

TEST_CASE("training overfits a single script") {
  TagModel m(toy_config(), toy_words(), 1, 3, 5);
  const auto script = toy_script();
  LabelMatrix y(1, 3);
  y.set(0, 0, true);
  y.set(0, 2, true);
  auto tax = all_active(3);
  TrainingProblem p;
  p.params = &m.params();
  p.logits = [&](std::size_t) { return m.logits(script); };
  p.labels = &y;
  p.taxonomy = &tax;
  p.train = {0};
  TrainConfig cfg;
  cfg.lr = 2e-2;
  cfg.max_epochs = 300;
  cfg.patience = 300;
  auto r = train(p, cfg);
  CHECK(r.log.back().train_loss < 1e-2);
}

TEST_CASE("identical seeds give identical loss traces") {
  auto run = [] {
    TagModel m(toy_config(), toy_words(), 1, 2, 9);
    std::vector<encoders::EncodedScript> scripts(3, toy_script());
    scripts[1].scenes.pop_back();
    scripts[2].scenes[0].all = {{3, 3}};
    LabelMatrix y(3, 2);
    y.set(0, 0, true);
    y.set(1, 1, true);
    y.set(2, 0, true);
    const std::vector<std::size_t> rows{0, 1, 2};
    auto tax = TagTaxonomy::build("a", {"x", "y"}, y, rows);
    TrainingProblem p;
    p.params = &m.params();
    p.logits = [&](std::size_t i) { return m.logits(scripts[i]); };
    p.labels = &y;
    p.taxonomy = &tax;
    p.train = rows;
    TrainConfig cfg;
    cfg.max_epochs = 4;
    std::vector<double> trace;
    for (const auto& e : train(p, cfg).log) trace.push_back(e.train_loss);
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("patience 5 stops a frozen model at epoch 6") {
  nn::ParameterStore store;
  auto w = store.add("w", {2}, {0.1, -0.1});
  LabelMatrix y(3, 2);
  y.set(0, 0, true);
  y.set(1, 1, true);
  y.set(2, 0, true);
  const std::vector<std::size_t> rows{0, 1, 2};
  auto tax = TagTaxonomy::build("a", {"x", "y"}, y, rows);
  TrainingProblem p;
  p.params = &store;
  // Gradients through `w` are identically zero, so nothing ever changes.
  p.logits = [&](std::size_t i) { return ad::add(Tensor::vector({0.2 * i, -0.1}), ad::scale(w, 0.0)); };
  p.labels = &y;
  p.taxonomy = &tax;
  p.train = {0, 1};
  p.validation = {2};
  TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.patience = 5;
  auto r = train(p, cfg);
  CHECK(r.epochs_run == 6);
  CHECK(r.log.size() == 6);
}

TEST_CASE("training rejects empty splits and non-finite losses") {
  nn::ParameterStore store;
  auto w = store.add("w", {1}, {1.0});
  LabelMatrix y(2, 1);
  y.set(0, 0, true);
  const std::vector<std::size_t> rows{0, 1};
  auto tax = TagTaxonomy::build("a", {"x"}, y, rows);
  TrainingProblem p;
  p.params = &store;
  p.labels = &y;
  p.taxonomy = &tax;
  p.logits = [&](std::size_t) { return ad::scale(w, std::nan("")); };
  CHECK(code_of([&] { train(p, {}); }) == "EmptySplit");
  p.train = rows;
  CHECK(code_of([&] { train(p, {}); }) == "NonFiniteLoss");
}

TEST_CASE("epoch log CSV") {
  CHECK(log_csv({{1, 0.5, 0.25, 5e-3, 0}}) == "epoch,train_loss,val_ap,lr,wallclock\n1,0.5,0.25,0.005,0\n");
}

TEST_CASE("logline model") {
  Rng rng(4);
  auto words = Tensor::constant({4, 100}, gradcheck::random_values(rng, 400));
  LoglineModel m(words, 50, 3, 11);
  CHECK(m.embedding_dim() == 100);
  CHECK(m.embed({2}).size() == 100);
  auto a = m.logits({1, 2, 3});
  LoglineModel again(words, 50, 3, 11);
  auto b = again.logits({1, 2, 3});
  for (std::size_t j = 0; j < 3; ++j) CHECK(a.at(j) == b.at(j));
  CHECK(code_of([&] { m.logits({}); }) == "EmptyStatement");
}

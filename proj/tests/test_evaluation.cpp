#include <cmath>

#include "doctest.h"
#include "scriptenc/error.hpp"
#include "scriptenc/evaluation.hpp"
#include "scriptenc/rng.hpp"

using namespace scriptenc;
using namespace scriptenc::evaluation;

namespace {

const AttributeSpace& toy_genres() {
  static const auto space = TagEmbeddingSpace::load(std::string(SCRIPTENC_FIXTURES) + "/toy_tag_embeddings.tsv");
  return space.attribute("genre");
}

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("micro F1 examples") {
  CHECK(micro_f1({{"a", "b"}}, {{"a", "b"}}) == 1.0);
  CHECK(micro_f1({{"a"}}, {{"b"}}) == 0.0);
  CHECK(micro_f1({{}}, {{}}) == 0.0);
  // tp 1, fp 1, fn 1
  CHECK(micro_f1({{"a", "c"}, {}}, {{"a"}, {"b"}}) == doctest::Approx(0.5));
  auto c = micro_counts({{"a", "c"}, {"x"}}, {{"a"}, {"x", "y"}});
  CHECK(c.tp == 2);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(code_of([] { micro_counts({{}}, {}); }) != "");
}

TEST_CASE("percentiles over the toy genre space") {
  const auto& s = toy_genres();
  CHECK(s.percentile("Crime", "Heist") == doctest::Approx(90));
  CHECK(s.percentile("Romance", "Drama") == doctest::Approx(100));
  CHECK(s.percentile("Heist", "Comedy") == doctest::Approx(80));
  CHECK(s.percentile("Crime", "Romance") == doctest::Approx(10));
  CHECK(s.percentile("Comedy", "Comedy") == 100);
  CHECK(s.similarity("Crime", "Heist") == doctest::Approx(0.9707).epsilon(1e-4));
  CHECK(code_of([&] { s.index("Western"); }) == "UnknownTag");
}

TEST_CASE("a near miss counts only when its percentile is above the cutoff") {
  const auto& s = toy_genres();
  const std::vector<TagSet> pred{{"Heist"}}, gold{{"Crime"}};
  auto at = [&](double cutoff) { return similarity_counts(pred, gold, s, cutoff); };
  CHECK(at(85).tp == 1);
  CHECK(at(90).tp == 0);
  CHECK(at(90).fp == 1);
  CHECK(at(90).fn == 1);
  CHECK(at(95).tp == 0);
}

TEST_CASE("matching is one-to-one and prefers identical tags") {
  const auto& s = toy_genres();
  // Crime is gold and predicted; Heist may not also claim it.
  auto c = similarity_counts({{"Crime", "Heist"}}, {{"Crime"}}, s, 50);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 0);
  // The closer pair wins: Romance-Drama (100) over Comedy-Drama (70).
  auto d = similarity_counts({{"Romance", "Comedy"}}, {{"Drama"}}, s, 60);
  CHECK(d.tp == 1);
  CHECK(d.fp == 1);
}

TEST_CASE("cutoff 100 is exact matching") {
  const auto& s = toy_genres();
  Rng rng(3);
  const auto& tags = s.tags();
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TagSet> pred(4), gold(4);
    for (std::size_t i = 0; i < 4; ++i)
      for (const auto& t : tags) {
        if (rng.bernoulli(0.4)) pred[i].insert(t);
        if (rng.bernoulli(0.4)) gold[i].insert(t);
      }
    CHECK(similarity_f1(pred, gold, s, 100) == micro_f1(pred, gold));
  }
}

TEST_CASE("lowering the cutoff never lowers similarity F1") {
  const auto& s = toy_genres();
  Rng rng(4);
  const auto& tags = s.tags();
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TagSet> pred(5), gold(5);
    for (std::size_t i = 0; i < 5; ++i)
      for (const auto& t : tags) {
        if (rng.bernoulli(0.3)) pred[i].insert(t);
        if (rng.bernoulli(0.3)) gold[i].insert(t);
      }
    double prev = -1;
    for (double cutoff : {100.0, 90.0, 80.0, 70.0, 50.0, 0.0}) {
      const double f = similarity_f1(pred, gold, s, cutoff);
      CHECK(f >= prev - 1e-12);
      prev = f;
    }
  }
}

TEST_CASE("equivalence classes by union-find") {
  const auto& s = toy_genres();
  const auto& tags = s.tags();
  auto exact = merge_equivalents(tags, s, 100);
  CHECK(exact.classes.size() == tags.size());
  auto two = merge_equivalents(tags, s, 85);
  CHECK(two.classes.size() == 3);
  CHECK(two.class_of.at("Crime") == two.class_of.at("Heist"));
  CHECK(two.class_of.at("Romance") == two.class_of.at("Drama"));
  // Above 75: Heist-Comedy joins Comedy to the Crime/Heist class by chaining.
  auto chain = merge_equivalents(tags, s, 75);
  CHECK(chain.classes.size() == 2);
  CHECK(chain.class_of.at("Crime") == chain.class_of.at("Comedy"));
}

TEST_CASE("tag perplexity") {
  CHECK(tag_perplexity({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(4));
  CHECK(tag_perplexity({0.5, 0.5, 0, 0}) == doctest::Approx(2));
  CHECK(tag_perplexity({1.0}) == doctest::Approx(1));
  CHECK(code_of([] { tag_perplexity({0.5, 0.6}); }) == "InvalidDistribution");
  CHECK(code_of([] { tag_perplexity({1.5, -0.5}); }) == "InvalidDistribution");
  CHECK(tag_distribution({1, 3}) == std::vector<double>{0.25, 0.75});
}

TEST_CASE("merging never raises perplexity") {
  const auto& s = toy_genres();
  const auto& tags = s.tags();
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> counts;
    for (std::size_t i = 0; i < tags.size(); ++i) counts.push_back(1 + rng.below(30));
    const double base = tag_perplexity(tag_distribution(counts));
    for (double cutoff : {90.0, 70.0, 30.0}) {
      auto merged = merged_counts(tags, counts, merge_equivalents(tags, s, cutoff));
      CHECK(tag_perplexity(tag_distribution(merged)) <= base + 1e-12);
    }
  }
}

TEST_CASE("pair permutations and effective cardinality") {
  CHECK(pair_permutations(2) == 2);
  CHECK(pair_permutations(5) == 20);
  CHECK(code_of([] { pair_permutations(1); }) == "DomainError");
  CHECK(cardinality_from_pairs(20) == doctest::Approx(5));
  CHECK(cardinality_from_pairs(0) == doctest::Approx(1));

  const auto& s = toy_genres();
  CHECK(effective_cardinality(merge_equivalents(s.tags(), s, 100)) == doctest::Approx(5));
  // Two merged pairs remove 4 of the 20 ordered pairs.
  CHECK(effective_cardinality(merge_equivalents(s.tags(), s, 85)) ==
        doctest::Approx((1 + std::sqrt(65.0)) / 2).epsilon(1e-12));
}

TEST_CASE("cutoff sweep rows") {
  const auto& s = toy_genres();
  const std::vector<TagSet> pred{{"Heist"}, {"Drama"}}, gold{{"Crime"}, {"Drama"}};
  const std::vector<double> counts{4, 2, 3, 1, 3};
  auto rows = cutoff_sweep(pred, gold, s, s.tags(), counts, {100, 85});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].f1 == doctest::Approx(0.5));
  CHECK(rows[0].perplexity_reduction == doctest::Approx(0.0));
  CHECK(rows[0].cardinality_reduction == doctest::Approx(0.0));
  CHECK(rows[1].f1 == doctest::Approx(1.0));
  CHECK(rows[1].perplexity_reduction > 0);
  CHECK(rows[1].cardinality_reduction == doctest::Approx(1 - (1 + std::sqrt(65.0)) / 10).epsilon(1e-12));
  auto j = sweep_report("genre", rows);
  CHECK(j["genre"].size() == 2);
}

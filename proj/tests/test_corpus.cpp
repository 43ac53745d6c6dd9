#include <algorithm>

#include "doctest.h"
#include "scriptenc/checkpoint.hpp"
#include "scriptenc/corpus.hpp"
#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"
#include "scriptenc/pipeline.hpp"
#include "scriptenc/synth.hpp"

using namespace scriptenc;
using namespace scriptenc::corpus;

namespace {

synth::SynthCorpus small_synth(std::size_t scripts, double signal = 0.8, std::uint64_t seed = 7) {
  synth::SynthConfig cfg;
  cfg.scripts = scripts;
  cfg.signal = signal;
  cfg.seed = seed;
  cfg.dim = 8;
  return synth::generate(cfg);
}

CorpusConfig small_config() {
  CorpusConfig c;
  c.embedding_dim = 8;
  c.workers = 2;
  return c;
}

}  // namespace

TEST_CASE("one malformed script out of ten is excluded with a reason") {
  auto s = small_synth(10);
  s.scripts[3].second = "\n   \n\n";
  const auto bad = s.scripts[3].first;
  auto c = build(s.scripts, s.tags, s.loglines, small_config());
  CHECK(c.entries.size() == 9);
  REQUIRE(c.excluded.size() == 1);
  CHECK(c.excluded[0].title == bad);
  CHECK(c.excluded[0].reason == "EmptyScript");
  CHECK(c.train.size() + c.validation.size() + c.heldout.size() == 9);

  s.tags.erase(s.scripts[5].first);
  auto d = build(s.scripts, s.tags, s.loglines, small_config());
  CHECK(d.entries.size() == 8);
  CHECK(std::any_of(d.excluded.begin(), d.excluded.end(), [](const Exclusion& e) { return e.reason == "MissingTags"; }));
}

TEST_CASE("splits depend only on the seed") {
  CHECK(assign_splits(50, 0.2, 0.1, 13) == assign_splits(50, 0.2, 0.1, 13));
  CHECK(assign_splits(50, 0.2, 0.1, 13) != assign_splits(50, 0.2, 0.1, 14));
  auto s = assign_splits(50, 0.2, 0.1, 13);
  CHECK(std::count(s.begin(), s.end(), Split::Heldout) == 10);
  CHECK(std::count(s.begin(), s.end(), Split::Validation) == 4);
  CHECK_THROWS_AS(assign_splits(10, 1.0, 0.1, 1), Error);

  auto syn = small_synth(12);
  auto a = build(syn.scripts, syn.tags, syn.loglines, small_config());
  auto shuffled = syn.scripts;
  std::reverse(shuffled.begin(), shuffled.end());
  auto b = build(shuffled, syn.tags, syn.loglines, small_config());
  CHECK(a.heldout == b.heldout);
  CHECK(a.vocab.hash() == b.vocab.hash());
}

TEST_CASE("rare tokens map to UNK") {
  auto s = small_synth(6);
  s.scripts[0].second += "\nINT. ATTIC - NIGHT\n\nA zyzzyva crawls.\n";
  auto c = build(s.scripts, s.tags, s.loglines, small_config());
  CHECK(c.vocab.id("zyzzyva") == text::Vocabulary::kUnk);
  CHECK(c.vocab.token(text::Vocabulary::kUnk) == text::Vocabulary::kUnkToken);
  CHECK(c.vocab.id(s.filler.front()) != text::Vocabulary::kUnk);
}

TEST_CASE("full-strength synthetic signal reaches every scene of positive scripts") {
  auto s = small_synth(10, 1.0, 3);
  for (const auto& [title, text] : s.scripts) {
    auto result = screenplay::parse_script(screenplay::RawScript::from_text(title, text));
    CHECK(result.report.score == 1.0);  // no Other lines
    CHECK(result.report.scene_count >= 4);
    CHECK(result.report.scene_count <= 8);
    for (const auto& tag : s.tags.at(title).at("genre")) {
      const auto& markers = s.markers.at(tag);
      for (const auto& scene : result.screenplay.scenes) {
        bool found = false;
        for (const auto& st : scene.statements)
          for (const auto& tok : text::tokenize(st.text))
            found |= std::find(markers.begin(), markers.end(), tok) != markers.end();
        CHECK(found);
      }
    }
  }
  CHECK_THROWS_AS(
      [] {
        synth::SynthConfig bad;
        bad.tags = 1;
        synth::generate(bad);
      }(),
      Error);
}

TEST_CASE("synthetic generation is seeded") {
  auto a = small_synth(5, 0.8, 11), b = small_synth(5, 0.8, 11), c = small_synth(5, 0.8, 12);
  CHECK(a.scripts == b.scripts);
  CHECK(a.tag_embeddings_tsv == b.tag_embeddings_tsv);
  CHECK(a.scripts != c.scripts);
}

TEST_CASE("checkpoint encoding round trips") {
  nn::ParameterStore store;
  store.add("w", {2, 3}, {1, -2, 3.5, 0, 1e-300, -7});
  store.add("b", {3}, {0.25, 0.5, 0.75});
  const auto bytes = checkpoint::encode(checkpoint::entries_of(store));
  CHECK(bytes.substr(0, 8) == "SCENCKPT");
  auto back = checkpoint::decode(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "w");
  CHECK(back[0].values[4] == 1e-300);

  nn::ParameterStore other;
  auto w = other.add("w", {2, 3}, std::vector<double>(6, 0.0));
  other.add("b", {3}, std::vector<double>(3, 0.0));
  checkpoint::apply(back, other);
  CHECK(w.at(2) == 3.5);
  CHECK(checkpoint::encode(checkpoint::entries_of(other)) == bytes);

  CHECK_THROWS_AS(checkpoint::decode(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(checkpoint::decode("NOTACKPT" + bytes.substr(8)), Error);
  nn::ParameterStore wrong;
  wrong.add("w", {3, 2}, std::vector<double>(6, 0.0));
  wrong.add("b", {3}, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(checkpoint::apply(back, wrong), Error);
}

TEST_CASE("config hash is FNV-1a over canonical JSON") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
  CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
  nlohmann::json a = {{"seed", 13}, {"lr", 0.005}};
  nlohmann::json b;
  b["lr"] = 0.005;
  b["seed"] = 13;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) == io::hex64(io::fnv1a64(R"({"lr":0.005,"seed":13})")));
  b["seed"] = 14;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("tags switched off in training leave the evaluation sets") {
  classifier::LabelMatrix y(2, 2);
  y.set(0, 0, true);
  y.set(1, 0, true);
  y.set(1, 1, true);
  const std::vector<std::size_t> rows{0, 1};
  const std::vector<std::string> tags{"always", "sometimes"};
  auto tax = classifier::TagTaxonomy::build("genre", tags, y, rows);
  const auto off = pipeline::inactive_tags(tags, tax);
  CHECK(off == std::set<std::string>{"always"});
  std::vector<evaluation::TagSet> sets{{"always", "sometimes"}, {"always"}};
  pipeline::drop_tags(sets, off);
  CHECK(sets == std::vector<evaluation::TagSet>{{"sometimes"}, {}});
}

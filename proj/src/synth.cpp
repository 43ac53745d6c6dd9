#include "scriptenc/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"
#include "scriptenc/rng.hpp"

namespace scriptenc::synth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SignalMode m) { return m == SignalMode::Bag ? "bag" : "order"; }

SignalMode parse_signal_mode(const std::string& s) {
  if (s == "bag") return SignalMode::Bag;
  if (s == "order") return SignalMode::Order;
  throw Error("InvalidArgument", "unknown signal mode '" + s + "' (bag, order)");
}

json SynthConfig::to_json() const {
  return {{"scripts", scripts},
          {"tags", tags},
          {"signal", signal},
          {"mode", to_string(mode)},
          {"positive_rate", positive_rate},
          {"topics", topics},
          {"topic_words", topic_words},
          {"topic_rate", topic_rate},
          {"filler_words", filler_words},
          {"markers_per_tag", markers_per_tag},
          {"scenes", {min_scenes, max_scenes}},
          {"statements", {min_statements, max_statements}},
          {"tokens", {min_tokens, max_tokens}},
          {"characters", characters},
          {"dim", dim},
          {"attribute", attribute},
          {"seed", seed}};
}

namespace {

constexpr const char* kTagNames[] = {"Alpha", "Bravo",  "Charlie", "Delta",  "Echo",   "Foxtrot", "Golf",
                                     "Hotel", "India",  "Juliett", "Kilo",   "Lima",   "Mike",    "November",
                                     "Oscar", "Papa",   "Quebec",  "Romeo",  "Sierra", "Tango",   "Uniform",
                                     "Victor", "Whiskey", "Xray",  "Yankee", "Zulu"};

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {}

  std::string make(std::size_t syllables) {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += consonants[rng_.below(consonants.size())];
        w += vowels[rng_.below(vowels.size())];
      }
      if (rng_.bernoulli(0.5)) w += consonants[rng_.below(consonants.size())];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

std::vector<double> unit(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

std::vector<double> gaussian(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  return unit(std::move(v));
}

std::vector<double> around(Rng& rng, const std::vector<double>& center, double noise) {
  auto n = gaussian(rng, center.size());
  std::vector<double> v(center.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = center[i] + noise * n[i];
  return unit(std::move(v));
}

std::size_t in_range(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

std::vector<std::string> wrap(const std::vector<std::string>& words, std::size_t width) {
  std::vector<std::string> lines;
  std::string cur;
  for (const auto& w : words) {
    if (!cur.empty() && cur.size() + 1 + w.size() > width) {
      lines.push_back(cur);
      cur.clear();
    }
    if (!cur.empty()) cur += ' ';
    cur += w;
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

struct StatementDraft {
  bool dialogue = false;
  std::size_t speaker = 0;
  std::vector<std::string> tokens;
};

}  // namespace

SynthCorpus generate(const SynthConfig& c) {
  if (c.tags < 2) throw Error("InvalidArgument", "synthetic corpus needs at least 2 tags");
  if (c.scripts < 2) throw Error("InvalidArgument", "synthetic corpus needs at least 2 scripts");
  if (c.min_scenes == 0 || c.min_scenes > c.max_scenes || c.min_statements == 0 ||
      c.min_statements > c.max_statements || c.min_tokens == 0 || c.min_tokens > c.max_tokens || c.topics == 0 ||
      c.topic_words == 0 || c.filler_words == 0 || c.characters == 0 || c.markers_per_tag == 0 || c.dim == 0) {
    throw Error("InvalidArgument", "synthetic corpus: inconsistent size ranges");
  }
  if (c.signal < 0 || c.signal > 1 || c.positive_rate <= 0 || c.positive_rate >= 1) {
    throw Error("InvalidArgument", "synthetic corpus: signal must lie in [0,1] and positive_rate in (0,1)");
  }

  Rng rng(c.seed);
  WordMaker words(rng);
  SynthCorpus out;
  out.embeddings = text::EmbeddingTable::parse("", c.dim);

  for (std::size_t i = 0; i < c.filler_words; ++i) {
    out.filler.push_back(words.make(2));
    out.embeddings.add(out.filler.back(), gaussian(rng, c.dim));
  }
  for (std::size_t t = 0; t < c.topics; ++t) {
    Topic topic{"topic_" + std::to_string(t), {}};
    const auto center = gaussian(rng, c.dim);
    for (std::size_t w = 0; w < c.topic_words; ++w) {
      topic.words.push_back(words.make(3));
      out.embeddings.add(topic.words.back(), around(rng, center, 0.35));
    }
    out.topics.push_back(std::move(topic));
  }
  for (std::size_t j = 0; j < c.tags; ++j) {
    const std::string name = j < std::size(kTagNames) ? kTagNames[j] : "Tag" + std::to_string(j);
    out.tag_names.push_back(name);
    const auto direction = gaussian(rng, c.dim);
    const std::size_t count = c.mode == SignalMode::Order ? 2 : c.markers_per_tag;
    for (std::size_t m = 0; m < count; ++m) {
      out.markers[name].push_back(words.make(4));
      // The two order tokens must be told apart, so each gets its own direction.
      out.embeddings.add(out.markers[name].back(),
                         c.mode == SignalMode::Order ? gaussian(rng, c.dim) : around(rng, direction, 0.2));
    }
  }
  std::vector<std::string> names, locations;
  for (std::size_t i = 0; i < c.characters; ++i) names.push_back(upper(words.make(2)));
  for (std::size_t i = 0; i < 12; ++i) locations.push_back(upper(words.make(3)));

  // Labels first, redrawn until each tag has both classes.
  std::vector<std::vector<bool>> labels;
  for (;;) {
    labels.assign(c.scripts, std::vector<bool>(c.tags));
    for (auto& row : labels)
      for (std::size_t j = 0; j < c.tags; ++j) row[j] = rng.bernoulli(c.positive_rate);
    bool ok = true;
    for (std::size_t j = 0; j < c.tags && ok; ++j) {
      std::size_t pos = 0;
      for (const auto& row : labels) pos += row[j];
      ok = pos > 0 && pos < c.scripts;
    }
    if (ok) break;
  }

  for (std::size_t s = 0; s < c.scripts; ++s) {
    char title_buf[32];
    std::snprintf(title_buf, sizeof title_buf, "script_%03zu", s + 1);
    const std::string title = title_buf;

    std::ostringstream script;
    auto& topics_of = out.scene_topics[title];
    const std::size_t scenes = in_range(rng, c.min_scenes, c.max_scenes);
    for (std::size_t sc = 0; sc < scenes; ++sc) {
      const std::size_t topic = rng.below(c.topics);
      topics_of.push_back(topic);

      std::vector<StatementDraft> drafts(in_range(rng, c.min_statements, c.max_statements));
      for (auto& d : drafts) {
        d.dialogue = rng.bernoulli(0.5);
        d.speaker = rng.below(c.characters);
        const std::size_t n = in_range(rng, c.min_tokens, c.max_tokens);
        for (std::size_t k = 0; k < n; ++k) {
          d.tokens.push_back(rng.bernoulli(c.topic_rate)
                                 ? out.topics[topic].words[rng.below(c.topic_words)]
                                 : out.filler[rng.below(c.filler_words)]);
        }
      }
      // Planted units go between original tokens, so an order pair is never split.
      for (auto& d : drafts) {
        std::vector<std::vector<std::string>> slots(d.tokens.size() + 1);
        for (std::size_t j = 0; j < c.tags; ++j) {
          const auto& mk = out.markers[out.tag_names[j]];
          const bool positive = labels[s][j];
          if (c.mode == SignalMode::Bag && !positive) continue;
          if (!rng.bernoulli(c.signal)) continue;
          auto& slot = slots[rng.below(slots.size())];
          if (c.mode == SignalMode::Bag) {
            slot.push_back(mk[rng.below(mk.size())]);
          } else {
            slot.push_back(positive ? mk[0] : mk[1]);
            slot.push_back(positive ? mk[1] : mk[0]);
          }
        }
        std::vector<std::string> merged;
        for (std::size_t i = 0; i < slots.size(); ++i) {
          merged.insert(merged.end(), slots[i].begin(), slots[i].end());
          if (i < d.tokens.size()) merged.push_back(d.tokens[i]);
        }
        d.tokens = std::move(merged);
      }

      script << (rng.bernoulli(0.7) ? "INT. " : "EXT. ") << locations[rng.below(locations.size())]
             << (rng.bernoulli(0.5) ? " - DAY" : " - NIGHT") << "\n\n";
      for (auto& d : drafts) {
        auto toks = d.tokens;
        toks.front()[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(toks.front()[0])));
        toks.back() += '.';
        if (d.dialogue) {
          script << std::string(20, ' ') << names[d.speaker] << '\n';
          if (rng.bernoulli(0.1)) script << std::string(15, ' ') << "(quietly)\n";
          for (const auto& line : wrap(toks, 35)) script << std::string(10, ' ') << line << '\n';
        } else {
          for (const auto& line : wrap(toks, 60)) script << line << '\n';
        }
        script << '\n';
      }
      if (sc + 1 < scenes && rng.bernoulli(0.2)) script << std::string(45, ' ') << "CUT TO:\n\n";
    }
    out.scripts.emplace_back(title, script.str());

    auto& tag_list = out.tags[title][c.attribute];
    std::vector<std::string> logline{"a", out.filler[rng.below(c.filler_words)], "story"};
    for (std::size_t j = 0; j < c.tags; ++j) {
      const auto& mk = out.markers[out.tag_names[j]];
      if (labels[s][j]) tag_list.push_back(out.tag_names[j]);
      if (c.mode == SignalMode::Bag) {
        if (labels[s][j]) logline.push_back(mk[rng.below(mk.size())]);
      } else {
        logline.push_back(labels[s][j] ? mk[0] : mk[1]);
        logline.push_back(labels[s][j] ? mk[1] : mk[0]);
      }
      logline.push_back(out.filler[rng.below(c.filler_words)]);
    }
    std::string text;
    for (const auto& w : logline) text += (text.empty() ? "" : " ") + w;
    out.loglines[title] = text + ".";
  }

  // Deterministic tag embeddings for similarity evaluation.
  std::ostringstream tsv;
  for (const auto& name : out.tag_names) {
    tsv << c.attribute << '\t' << name << '\t';
    const auto v = gaussian(rng, 8);
    for (std::size_t i = 0; i < v.size(); ++i) tsv << (i ? " " : "") << io::format_double(v[i]);
    tsv << '\n';
  }
  out.tag_embeddings_tsv = tsv.str();
  return out;
}

void write(const SynthCorpus& corpus, const SynthConfig& config, const fs::path& dir) {
  fs::create_directories(dir / "scripts");
  for (const auto& [title, text] : corpus.scripts) io::write_file_atomic(dir / "scripts" / (title + ".txt"), text);

  json tags = json::object();
  for (const auto& [title, attrs] : corpus.tags) tags[title] = attrs;
  io::write_file_atomic(dir / "tags.json", tags.dump(2) + "\n");
  io::write_file_atomic(dir / "loglines.json", json(corpus.loglines).dump(2) + "\n");
  io::write_file_atomic(dir / "embeddings.txt", corpus.embeddings.write());
  io::write_file_atomic(dir / "tag_embeddings.tsv", corpus.tag_embeddings_tsv);

  json topics = json::array();
  for (const auto& t : corpus.topics) topics.push_back({{"name", t.name}, {"words", t.words}});
  json doc = {{"topics", topics}, {"scene_topics", corpus.scene_topics}, {"markers", corpus.markers},
              {"filler", corpus.filler}};
  io::write_file_atomic(dir / "topics.json", doc.dump(2) + "\n");

  const json cfg = config.to_json();
  io::write_file_atomic(dir / "synth_manifest.json",
                        json{{"config", cfg}, {"config_hash", corpus::config_hash(cfg)}}.dump(2) + "\n");
}

}  // namespace scriptenc::synth

#include "scriptenc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"
#include "scriptenc/parallel.hpp"
#include "scriptenc/rng.hpp"

namespace scriptenc::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

TagsFile parse_tags(const std::string& json_text) {
  TagsFile out;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error("MalformedTags", std::string("tags file: ") + e.what());
  }
  if (!j.is_object()) throw Error("MalformedTags", "tags file must map titles to {attribute: [tags]}");
  for (const auto& [title, attrs] : j.items()) {
    if (!attrs.is_object()) throw Error("MalformedTags", "tags for '" + title + "' must be an object");
    for (const auto& [attr, values] : attrs.items()) {
      auto& list = out[title][attr];
      if (values.is_string()) {
        list.push_back(values.get<std::string>());
      } else if (values.is_array()) {
        for (const auto& v : values) list.push_back(v.get<std::string>());
      } else {
        throw Error("MalformedTags", "tags for '" + title + "'/" + attr + " must be a list of strings");
      }
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }
  return out;
}

TagsFile load_tags(const fs::path& path) { return parse_tags(io::read_file(path)); }

LoglinesFile parse_loglines(const std::string& json_text) {
  LoglinesFile out;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error("MalformedLoglines", std::string("loglines file: ") + e.what());
  }
  if (!j.is_object()) throw Error("MalformedLoglines", "loglines file must map titles to text");
  for (const auto& [title, text] : j.items()) out[title] = text.get<std::string>();
  return out;
}

LoglinesFile load_loglines(const fs::path& path) { return parse_loglines(io::read_file(path)); }

json CorpusConfig::to_json() const {
  return {{"heldout_fraction", heldout_fraction},
          {"validation_fraction", validation_fraction},
          {"min_count", min_count},
          {"scene_cap", scene_cap},
          {"embedding_dim", embedding_dim},
          {"seed", seed},
          {"heading_prefixes", parser.heading_prefixes},
          {"tab_width", parser.tab_width},
          {"character_indent", parser.character_indent},
          {"dialogue_indent", parser.dialogue_indent},
          {"max_cue_length", parser.max_cue_length}};
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Heldout: return "heldout";
  }
  return "train";
}

std::vector<Split> assign_splits(std::size_t n, double heldout_fraction, double validation_fraction,
                                 std::uint64_t seed) {
  if (heldout_fraction < 0 || heldout_fraction >= 1 || validation_fraction < 0 || validation_fraction >= 1) {
    throw Error("InvalidArgument", "split fractions must lie in [0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  auto portion = [](std::size_t total, double frac) {
    if (frac <= 0 || total < 2) return std::size_t{0};
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(frac * static_cast<double>(total))), 1,
                                   total - 1);
  };
  const std::size_t n_heldout = portion(n, heldout_fraction);
  const std::size_t n_val = portion(n - n_heldout, validation_fraction);
  std::vector<Split> out(n, Split::Train);
  for (std::size_t i = 0; i < n_heldout; ++i) out[order[i]] = Split::Heldout;
  for (std::size_t i = n_heldout; i < n_heldout + n_val; ++i) out[order[i]] = Split::Validation;
  return out;
}

std::string config_hash(const json& config) { return io::hex64(io::fnv1a64(config.dump())); }

Corpus build(std::vector<std::pair<std::string, std::string>> scripts, const TagsFile& tags,
             const LoglinesFile& loglines, const CorpusConfig& config) {
  std::sort(scripts.begin(), scripts.end());
  for (std::size_t i = 1; i < scripts.size(); ++i) {
    if (scripts[i].first == scripts[i - 1].first) {
      throw Error("DuplicateTitle", "two scripts are titled '" + scripts[i].first + "'");
    }
  }

  struct Parsed {
    std::optional<screenplay::Screenplay> sp;
    Exclusion why;
  };
  std::vector<Parsed> parsed(scripts.size());
  parallel_for(
      scripts.size(),
      [&](std::size_t i) {
        const auto& [title, text] = scripts[i];
        auto& out = parsed[i];
        out.why.title = title;
        try {
          auto result = screenplay::parse_script(screenplay::RawScript::from_text(title, text), config.parser);
          if (!result.report.usable) {
            out.why.reason = "LowQuality";
            out.why.detail = result.report.to_json().dump();
            return;
          }
          out.sp = screenplay::split_long_scenes(result.screenplay, config.scene_cap);
        } catch (const Error& e) {
          out.why.reason = e.code();
          out.why.detail = e.what();
        }
      },
      config.workers);

  Corpus corpus;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const std::string& title = scripts[i].first;
    if (!parsed[i].sp) {
      corpus.excluded.push_back(parsed[i].why);
      continue;
    }
    auto t = tags.find(title);
    if (t == tags.end()) {
      corpus.excluded.push_back({title, "MissingTags", "no entry in the tags file"});
      continue;
    }
    Entry e;
    e.screenplay = std::move(*parsed[i].sp);
    e.tags = t->second;
    if (auto l = loglines.find(title); l != loglines.end()) e.logline = l->second;
    corpus.entries.push_back(std::move(e));
  }

  const auto splits = assign_splits(corpus.entries.size(), config.heldout_fraction, config.validation_fraction,
                                    config.seed);
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    corpus.entries[i].split = splits[i];
    (splits[i] == Split::Train        ? corpus.train
     : splits[i] == Split::Validation ? corpus.validation
                                      : corpus.heldout)
        .push_back(i);
  }

  std::map<std::string, std::size_t> counts;
  std::vector<screenplay::Screenplay> sps;
  for (const auto& e : corpus.entries) {
    for (const auto& scene : e.screenplay.scenes)
      for (const auto& st : scene.statements)
        for (auto& tok : text::tokenize(st.text)) ++counts[tok];
    sps.push_back(e.screenplay);
  }
  corpus.vocab = text::Vocabulary::build(counts, config.min_count);
  corpus.characters = encoders::CharacterTable::build(sps);
  return corpus;
}

Corpus ingest(const fs::path& scripts_dir, const TagsFile& tags, const LoglinesFile& loglines,
              const CorpusConfig& config) {
  if (!fs::is_directory(scripts_dir)) {
    throw Error("NotFound", "scripts directory '" + scripts_dir.string() + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(scripts_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, std::string>> scripts;
  for (const auto& f : files) scripts.emplace_back(f.stem().string(), io::read_file(f));
  return build(std::move(scripts), tags, loglines, config);
}

std::vector<std::string> Corpus::tag_list(const std::string& attribute) const {
  std::set<std::string> all;
  for (const auto& e : entries) {
    if (auto it = e.tags.find(attribute); it != e.tags.end()) all.insert(it->second.begin(), it->second.end());
  }
  return {all.begin(), all.end()};
}

classifier::LabelMatrix Corpus::labels(const std::string& attribute, const std::vector<std::string>& tags) const {
  classifier::LabelMatrix y(entries.size(), tags.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto it = entries[i].tags.find(attribute);
    if (it == entries[i].tags.end()) continue;
    for (std::size_t j = 0; j < tags.size(); ++j) {
      y.set(i, j, std::binary_search(it->second.begin(), it->second.end(), tags[j]));
    }
  }
  return y;
}

std::vector<encoders::EncodedScript> Corpus::encode() const {
  std::vector<encoders::EncodedScript> out(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    out[i] = encoders::encode_tokens(entries[i].screenplay, vocab, characters);
  });
  return out;
}

json Corpus::manifest(const CorpusConfig& config) const {
  json splits = json::object();
  for (const auto& e : entries) splits[e.screenplay.title] = to_string(e.split);
  json excl = json::array();
  for (const auto& x : excluded) excl.push_back({{"title", x.title}, {"reason", x.reason}, {"detail", x.detail}});
  const json cfg = config.to_json();
  return {{"config", cfg},
          {"config_hash", config_hash(cfg)},
          {"seed", config.seed},
          {"scripts", entries.size()},
          {"train", train.size()},
          {"validation", validation.size()},
          {"heldout", heldout.size()},
          {"splits", splits},
          {"vocabulary_size", vocab.size()},
          {"vocabulary_hash", vocab.hash()},
          {"characters", characters.size()},
          {"excluded", excl}};
}

}  // namespace scriptenc::corpus

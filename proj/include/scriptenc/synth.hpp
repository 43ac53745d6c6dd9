#pragma once

// Synthetic screenplay corpora with planted tag signals and planted scene
// topics, used as test oracles for training and descriptor recovery.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "scriptenc/corpus.hpp"
#include "scriptenc/text.hpp"

namespace scriptenc::synth {

enum class SignalMode {
  Bag,    // positive scripts carry tag marker tokens
  Order,  // every script carries both tokens of a tag pair; their order encodes the label
};
std::string to_string(SignalMode m);
SignalMode parse_signal_mode(const std::string& s);

struct SynthConfig {
  std::size_t scripts = 40;
  std::size_t tags = 3;
  double signal = 0.8;  // per-statement probability of planting a tag's signal
  SignalMode mode = SignalMode::Bag;
  double positive_rate = 0.5;
  std::size_t topics = 3;
  std::size_t topic_words = 10;
  double topic_rate = 0.5;  // share of statement tokens drawn from the scene's topic
  std::size_t filler_words = 40;
  std::size_t markers_per_tag = 3;
  std::size_t min_scenes = 4, max_scenes = 8;
  std::size_t min_statements = 3, max_statements = 6;  // per scene
  std::size_t min_tokens = 4, max_tokens = 9;          // per statement
  std::size_t characters = 6;
  std::size_t dim = 100;
  std::string attribute = "genre";
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
};

struct Topic {
  std::string name;
  std::vector<std::string> words;
};

struct SynthCorpus {
  std::vector<std::pair<std::string, std::string>> scripts;  // title, screenplay text
  corpus::TagsFile tags;
  corpus::LoglinesFile loglines;
  text::EmbeddingTable embeddings;
  std::vector<std::string> tag_names;
  std::map<std::string, std::vector<std::string>> markers;  // tag -> marker tokens (Order: {first, second})
  std::vector<Topic> topics;
  std::map<std::string, std::vector<std::size_t>> scene_topics;  // title -> planted topic per scene
  std::vector<std::string> filler;
  std::string tag_embeddings_tsv;
};

// Throws InvalidArgument for fewer than 2 tags or inconsistent ranges.
SynthCorpus generate(const SynthConfig& config);

// Layout: scripts/<title>.txt, tags.json, loglines.json, embeddings.txt,
// topics.json, tag_embeddings.tsv, synth_manifest.json.
void write(const SynthCorpus& corpus, const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace scriptenc::synth

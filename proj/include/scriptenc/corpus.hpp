#pragma once

// Corpus ingestion: parse a directory of screenplays, attach tags and
// loglines, filter unusable parses, split, and build the vocabulary.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scriptenc/classifier.hpp"
#include "scriptenc/encoders.hpp"
#include "scriptenc/screenplay.hpp"
#include "scriptenc/text.hpp"

namespace scriptenc::corpus {

// title -> attribute -> tag values
using TagsFile = std::map<std::string, std::map<std::string, std::vector<std::string>>>;
using LoglinesFile = std::map<std::string, std::string>;

TagsFile parse_tags(const std::string& json_text);
TagsFile load_tags(const std::filesystem::path& path);
LoglinesFile parse_loglines(const std::string& json_text);
LoglinesFile load_loglines(const std::filesystem::path& path);

struct CorpusConfig {
  double heldout_fraction = 0.2;
  double validation_fraction = 0.1;  // of the non-heldout scripts
  std::size_t min_count = 5;
  std::size_t scene_cap = 60;
  std::size_t embedding_dim = 100;
  std::uint64_t seed = 13;
  std::size_t workers = 0;  // 0: hardware concurrency
  screenplay::ParserConfig parser;

  nlohmann::json to_json() const;
};

enum class Split { Train, Validation, Heldout };
std::string to_string(Split s);

struct Entry {
  screenplay::Screenplay screenplay;
  std::map<std::string, std::vector<std::string>> tags;
  std::optional<std::string> logline;
  Split split = Split::Train;
};

struct Exclusion {
  std::string title;
  std::string reason;  // error code, e.g. "MissingTags", "EmptyScript", "LowQuality"
  std::string detail;
};

struct Corpus {
  std::vector<Entry> entries;  // sorted by title
  std::vector<std::size_t> train, validation, heldout;
  text::Vocabulary vocab;
  encoders::CharacterTable characters;
  std::vector<Exclusion> excluded;

  // Sorted union of the attribute's tag values across the corpus.
  std::vector<std::string> tag_list(const std::string& attribute) const;
  classifier::LabelMatrix labels(const std::string& attribute, const std::vector<std::string>& tags) const;
  std::vector<encoders::EncodedScript> encode() const;

  nlohmann::json manifest(const CorpusConfig& config) const;
};

// Scripts are the *.txt files of the directory (title = file stem).
// Embeddings are checked for dimension only; the vocabulary comes from the
// scripts themselves (tokens with count >= min_count across the corpus).
Corpus ingest(const std::filesystem::path& scripts_dir, const TagsFile& tags, const LoglinesFile& loglines,
              const CorpusConfig& config);

// Already-loaded scripts (title, raw text); same filtering and splitting.
Corpus build(std::vector<std::pair<std::string, std::string>> scripts, const TagsFile& tags,
             const LoglinesFile& loglines, const CorpusConfig& config);

// Seeded assignment of n sorted items to train/validation/heldout.
std::vector<Split> assign_splits(std::size_t n, double heldout_fraction, double validation_fraction,
                                 std::uint64_t seed);

// FNV-1a of the canonical (sorted-key, compact) JSON text.
std::string config_hash(const nlohmann::json& config);

}  // namespace scriptenc::corpus

#pragma once

// Glue shared by the command-line tool and the acceptance checks: build a
// tagger over a corpus, train it, turn logits into tag sets, and assemble
// descriptor-model inputs from a frozen scene encoder.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "scriptenc/classifier.hpp"
#include "scriptenc/corpus.hpp"
#include "scriptenc/descriptors.hpp"
#include "scriptenc/encoders.hpp"
#include "scriptenc/evaluation.hpp"
#include "scriptenc/text.hpp"

namespace scriptenc::pipeline {

struct TaggerSpec {
  encoders::ModelConfig model;
  bool logline = false;  // logline baseline: BiGRU over the logline instead of the script

  nlohmann::json to_json() const;
  static TaggerSpec from_json(const nlohmann::json& j);
};

// Accepts a model variant ("full", "han", ...), an encoder kind ("gru_attn",
// "boe", ...) or "logline", updating the matching field of `spec`.
void apply_variant_flag(TaggerSpec& spec, const std::string& value);

class Tagger {
 public:
  Tagger(const TaggerSpec& spec, const corpus::Corpus& corpus, const text::EmbeddingTable& embeddings,
         std::size_t num_tags, std::uint64_t seed);

  // Logits [L] for corpus entry i.
  ad::Tensor logits(std::size_t entry) const;
  nn::ParameterStore& params();
  const TaggerSpec& spec() const { return spec_; }
  // Entries the tagger can score (all of them, or those with a logline).
  bool covers(std::size_t entry) const;
  const classifier::TagModel* script_model() const { return script_.get(); }

 private:
  TaggerSpec spec_;
  std::unique_ptr<classifier::TagModel> script_;
  std::unique_ptr<classifier::LoglineModel> logline_;
  std::vector<encoders::EncodedScript> encoded_;
  std::vector<encoders::TokenIds> loglines_;
};

struct TrainedTagger {
  std::vector<std::string> tags;
  classifier::LabelMatrix labels;
  classifier::TagTaxonomy taxonomy;
  classifier::TrainResult result;
};

// Sorted tag values of the attribute; UnknownAttribute when no script has any.
std::vector<std::string> attribute_tags(const corpus::Corpus& corpus, const std::string& attribute);

// Trains on the corpus train split, selecting on the validation split.
TrainedTagger train_tagger(Tagger& tagger, const corpus::Corpus& corpus, const std::string& attribute,
                           const classifier::TrainConfig& config);

std::vector<std::size_t> covered(const Tagger& tagger, const std::vector<std::size_t>& entries);

std::vector<evaluation::TagSet> predict_sets(const Tagger& tagger, const std::vector<std::string>& tags,
                                             const std::vector<std::size_t>& entries, double threshold = 0.5);
std::vector<evaluation::TagSet> gold_sets(const corpus::Corpus& corpus, const std::string& attribute,
                                          const std::vector<std::size_t>& entries);

// Removes the given tags from every set; used for tags left out of training.
void drop_tags(std::vector<evaluation::TagSet>& sets, const std::set<std::string>& tags);

// Tags the taxonomy switched off (no positive or no negative training row).
std::set<std::string> inactive_tags(const std::vector<std::string>& tags, const classifier::TagTaxonomy& taxonomy);

// Occurrences of each tag over every corpus entry.
std::vector<double> tag_counts(const corpus::Corpus& corpus, const std::string& attribute,
                               const std::vector<std::string>& tags);

struct DescriptorInputs {
  std::vector<std::string> vocabulary;           // descriptor vocabulary with pretrained vectors
  std::vector<std::vector<double>> embeddings;   // aligned to `vocabulary`
  std::vector<descriptors::ScriptScenes> scripts;  // aligned to the requested entries
  std::vector<std::vector<std::string>> scene_documents;  // tokens per scene, for coherence
  std::vector<bool> allowed;  // corpus vocabulary ids kept by the restriction
};

// The target encoder must embed scenes in word space (HAN with BoE+Attn).
// v_t and u_t both come from the frozen target fed the restricted vocabulary.
DescriptorInputs descriptor_inputs(const corpus::Corpus& corpus, const encoders::HierarchicalModel& target,
                                   const text::EmbeddingTable& embeddings, const std::vector<std::size_t>& entries,
                                   std::size_t min_movies, std::size_t skip_top);

// v_t / u_t for further entries under an existing restriction.
std::vector<descriptors::ScriptScenes> scene_inputs(const corpus::Corpus& corpus,
                                                   const encoders::HierarchicalModel& target,
                                                   const std::vector<bool>& allowed,
                                                   const std::vector<std::size_t>& entries);

}  // namespace scriptenc::pipeline

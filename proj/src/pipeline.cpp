#include "scriptenc/pipeline.hpp"

#include <algorithm>
#include <set>

#include "scriptenc/error.hpp"

namespace scriptenc::pipeline {

using nlohmann::json;

json TaggerSpec::to_json() const {
  json j = model.to_json();
  j["logline"] = logline;
  return j;
}

TaggerSpec TaggerSpec::from_json(const json& j) {
  TaggerSpec s;
  s.model = encoders::ModelConfig::from_json(j);
  s.logline = j.value("logline", false);
  return s;
}

void apply_variant_flag(TaggerSpec& spec, const std::string& value) {
  if (value == "logline" || value == "loglines") {
    spec.logline = true;
    return;
  }
  try {
    spec.model.encoder.kind = encoders::parse_encoder_kind(value);
    return;
  } catch (const Error&) {
  }
  try {
    spec.model.variant = encoders::parse_variant(value);
  } catch (const Error&) {
    throw Error("UnknownVariant", "'" + value + "' is neither a model variant, an encoder kind nor 'logline'");
  }
}

Tagger::Tagger(const TaggerSpec& spec, const corpus::Corpus& corpus, const text::EmbeddingTable& embeddings,
               std::size_t num_tags, std::uint64_t seed)
    : spec_(spec) {
  if (embeddings.dim() != spec.model.encoder.input_dim) {
    throw Error("EmbeddingDimMismatch", "embeddings have dimension " + std::to_string(embeddings.dim()) +
                                            ", model expects " + std::to_string(spec.model.encoder.input_dim));
  }
  ad::Tensor words = embeddings.matrix_for(corpus.vocab);
  if (spec.logline) {
    logline_ = std::make_unique<classifier::LoglineModel>(words, spec.model.encoder.hidden_per_direction, num_tags,
                                                          seed);
    loglines_.resize(corpus.entries.size());
    for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
      if (corpus.entries[i].logline) loglines_[i] = corpus.vocab.encode(*corpus.entries[i].logline);
    }
  } else {
    script_ = std::make_unique<classifier::TagModel>(spec.model, words, corpus.characters.size(), num_tags, seed);
    encoded_ = corpus.encode();
  }
}

ad::Tensor Tagger::logits(std::size_t entry) const {
  if (logline_) return logline_->logits(loglines_.at(entry));
  return script_->logits(encoded_.at(entry));
}

nn::ParameterStore& Tagger::params() { return logline_ ? logline_->params() : script_->params(); }

bool Tagger::covers(std::size_t entry) const { return !logline_ || !loglines_.at(entry).empty(); }

std::vector<std::size_t> covered(const Tagger& tagger, const std::vector<std::size_t>& entries) {
  std::vector<std::size_t> out;
  for (std::size_t i : entries)
    if (tagger.covers(i)) out.push_back(i);
  return out;
}

std::vector<std::string> attribute_tags(const corpus::Corpus& corpus, const std::string& attribute) {
  auto tags = corpus.tag_list(attribute);
  if (tags.empty()) throw Error("UnknownAttribute", "no script carries tags for attribute '" + attribute + "'");
  return tags;
}

TrainedTagger train_tagger(Tagger& tagger, const corpus::Corpus& corpus, const std::string& attribute,
                           const classifier::TrainConfig& config) {
  TrainedTagger out;
  out.tags = attribute_tags(corpus, attribute);
  out.labels = corpus.labels(attribute, out.tags);
  classifier::TrainingProblem problem;
  problem.params = &tagger.params();
  problem.logits = [&tagger](std::size_t i) { return tagger.logits(i); };
  problem.labels = &out.labels;
  problem.train = covered(tagger, corpus.train);
  problem.validation = covered(tagger, corpus.validation);
  out.taxonomy = classifier::TagTaxonomy::build(attribute, out.tags, out.labels, problem.train);
  problem.taxonomy = &out.taxonomy;
  out.result = classifier::train(problem, config);
  return out;
}

std::vector<evaluation::TagSet> predict_sets(const Tagger& tagger, const std::vector<std::string>& tags,
                                             const std::vector<std::size_t>& entries, double threshold) {
  const auto z = classifier::predict_logits([&tagger](std::size_t i) { return tagger.logits(i); }, entries);
  std::vector<evaluation::TagSet> out(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto bin = classifier::predict_tags(z[k], threshold);
    for (std::size_t j = 0; j < tags.size(); ++j)
      if (bin[j]) out[k].insert(tags[j]);
  }
  return out;
}

std::vector<evaluation::TagSet> gold_sets(const corpus::Corpus& corpus, const std::string& attribute,
                                          const std::vector<std::size_t>& entries) {
  std::vector<evaluation::TagSet> out(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& tags = corpus.entries.at(entries[k]).tags;
    if (auto it = tags.find(attribute); it != tags.end()) out[k].insert(it->second.begin(), it->second.end());
  }
  return out;
}

void drop_tags(std::vector<evaluation::TagSet>& sets, const std::set<std::string>& tags) {
  for (auto& s : sets)
    for (const auto& t : tags) s.erase(t);
}

std::set<std::string> inactive_tags(const std::vector<std::string>& tags, const classifier::TagTaxonomy& taxonomy) {
  std::set<std::string> out;
  for (std::size_t j = 0; j < tags.size(); ++j)
    if (!taxonomy.active[j]) out.insert(tags[j]);
  return out;
}

std::vector<double> tag_counts(const corpus::Corpus& corpus, const std::string& attribute,
                               const std::vector<std::string>& tags) {
  std::vector<double> counts(tags.size(), 0.0);
  for (const auto& e : corpus.entries) {
    auto it = e.tags.find(attribute);
    if (it == e.tags.end()) continue;
    for (std::size_t j = 0; j < tags.size(); ++j)
      if (std::binary_search(it->second.begin(), it->second.end(), tags[j])) counts[j] += 1.0;
  }
  return counts;
}

DescriptorInputs descriptor_inputs(const corpus::Corpus& corpus, const encoders::HierarchicalModel& target,
                                   const text::EmbeddingTable& embeddings, const std::vector<std::size_t>& entries,
                                   std::size_t min_movies, std::size_t skip_top) {
  DescriptorInputs out;
  std::vector<std::vector<std::string>> movies;
  for (std::size_t i : entries) {
    std::vector<std::string> toks;
    for (const auto& scene : corpus.entries.at(i).screenplay.scenes) {
      std::vector<std::string> doc;
      for (const auto& st : scene.statements)
        for (auto& t : text::tokenize(st.text)) doc.push_back(std::move(t));
      toks.insert(toks.end(), doc.begin(), doc.end());
      out.scene_documents.push_back(std::move(doc));
    }
    movies.push_back(std::move(toks));
  }

  std::vector<bool> allowed(corpus.vocab.size(), false);
  for (auto& tok : descriptors::descriptor_vocabulary(movies, min_movies, skip_top)) {
    const std::size_t id = corpus.vocab.id(tok);
    const auto* vec = embeddings.find(tok);
    if (id == text::Vocabulary::kUnk || vec == nullptr) continue;
    allowed[id] = true;
    out.embeddings.push_back(*vec);
    out.vocabulary.push_back(std::move(tok));
  }
  if (out.vocabulary.empty()) {
    throw Error("InsufficientVocab", "descriptor vocabulary is empty; lower --min-movies or --skip-top");
  }

  out.allowed = std::move(allowed);
  out.scripts = scene_inputs(corpus, target, out.allowed, entries);
  return out;
}

std::vector<descriptors::ScriptScenes> scene_inputs(const corpus::Corpus& corpus,
                                                   const encoders::HierarchicalModel& target,
                                                   const std::vector<bool>& allowed,
                                                   const std::vector<std::size_t>& entries) {
  const descriptors::ReconstructionTarget rt(target, allowed);
  std::vector<descriptors::ScriptScenes> out;
  for (std::size_t i : entries) {
    const auto enc = encoders::encode_tokens(corpus.entries.at(i).screenplay, corpus.vocab, corpus.characters);
    descriptors::ScriptScenes s;
    s.u = rt.script(enc);
    s.v = s.u;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace scriptenc::pipeline

#pragma once

// Sequence encoders (BoE, BoE+Attn, GRU, GRU+Attn) and the three-tier
// hierarchical script encoder built from them.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scriptenc/autodiff.hpp"
#include "scriptenc/nn.hpp"
#include "scriptenc/screenplay.hpp"
#include "scriptenc/text.hpp"

namespace scriptenc::encoders {

using ad::Tensor;

enum class EncoderKind { BoE, BoEAttn, GRU, GRUAttn };
enum class AttentionNorm { Softmax, Linear };
enum class Variant { Full, PlusChars, MinusAction, MinusDialogue, TwoTier, Han };

std::string to_string(EncoderKind k);
std::string to_string(AttentionNorm n);
std::string to_string(Variant v);
EncoderKind parse_encoder_kind(const std::string& s);
AttentionNorm parse_attention_norm(const std::string& s);
Variant parse_variant(const std::string& s);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::GRUAttn;
  std::size_t input_dim = 100;
  std::size_t hidden_per_direction = 50;
  std::size_t attention_dim = 100;  // must equal the dimension of the attended vectors
  AttentionNorm attention_normalization = AttentionNorm::Softmax;

  std::size_t output_dim() const;
  // Dimension the attention vector p works over for this spec.
  std::size_t attended_dim() const;
};

struct Attention {
  Tensor weights;  // [T]
  Tensor pooled;   // [n]
};

// Weights over the rows of `outputs` [T x n] from scores p . c_i, either
// softmax-normalized or divided by their sum; pooled = sum_i w_i c_i.
Attention attend(const Tensor& outputs, const Tensor& p, AttentionNorm norm);

struct Encoding {
  Tensor output;
  Tensor weights;  // attention weights; undefined for BoE and GRU
};

class SequenceEncoder {
 public:
  static SequenceEncoder create(nn::ParameterStore& store, const std::string& name, const EncoderSpec& spec, Rng& rng);

  // inputs: [T x input_dim], T >= 1.
  Encoding encode(const Tensor& inputs) const;
  const EncoderSpec& spec() const { return spec_; }
  std::size_t output_dim() const { return spec_.output_dim(); }

 private:
  EncoderSpec spec_;
  std::optional<nn::BiGru> gru_;
  Tensor attention_;  // p
};

// ---- documents ---------------------------------------------------------------

class CharacterTable {
 public:
  static constexpr std::size_t kUnk = 0;
  static CharacterTable build(const std::vector<screenplay::Screenplay>& scripts);
  static CharacterTable from_names(std::vector<std::string> names);
  std::size_t id(const std::string& name) const;
  std::size_t size() const { return names_.size(); }  // including UNK
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_{"<unk>"};
  std::map<std::string, std::size_t> index_;
};

using TokenIds = std::vector<std::size_t>;

struct EncodedScene {
  std::vector<TokenIds> action;
  std::vector<TokenIds> dialogue;
  std::vector<TokenIds> all;  // every statement, in script order
  std::vector<std::size_t> characters;
};

struct EncodedScript {
  std::string title;
  std::vector<EncodedScene> scenes;
};

// Maps statements to vocabulary ids; statements without tokens are dropped.
EncodedScene encode_scene_tokens(const screenplay::Scene& scene, const text::Vocabulary& vocab,
                                 const CharacterTable& chars);
EncodedScript encode_tokens(const screenplay::Screenplay& sp, const text::Vocabulary& vocab,
                            const CharacterTable& chars);

// ---- hierarchical model ---------------------------------------------------------

struct ModelConfig {
  EncoderSpec encoder;  // kind and dims shared by every tier
  Variant variant = Variant::Full;
  bool characters = false;  // forced on by Variant::PlusChars
  std::size_t character_dim = 10;

  bool uses_characters() const { return characters || variant == Variant::PlusChars; }
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct SceneEncoding {
  Tensor embedding;
  std::vector<Tensor> block_weights;  // statement-tier attention per channel, when present
};

struct ScriptEncoding {
  Tensor embedding;
  std::vector<Tensor> scenes;
  Tensor scene_weights;  // script-tier attention; undefined without attention
};

class HierarchicalModel {
 public:
  // word_embeddings: constant [V x input_dim] matrix aligned to the vocabulary.
  HierarchicalModel(ModelConfig config, Tensor word_embeddings, std::size_t num_characters, Rng& rng);

  HierarchicalModel(const HierarchicalModel&) = delete;
  HierarchicalModel& operator=(const HierarchicalModel&) = delete;

  SceneEncoding encode_scene(const EncodedScene& scene) const;
  ScriptEncoding encode_script(const EncodedScript& script) const;

  // Encodes one statement (or token run) with the given tier encoder.
  Tensor encode_statement(const TokenIds& tokens, const SequenceEncoder& encoder) const;

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  std::size_t scene_dim() const { return scene_dim_; }
  std::size_t script_dim() const { return script_->output_dim(); }
  const Tensor& word_embeddings() const { return words_; }

 private:
  Tensor channel(const std::vector<TokenIds>& statements, const std::optional<SequenceEncoder>& stmt,
                 const SequenceEncoder& scene, std::vector<Tensor>& weights) const;

  ModelConfig config_;
  Tensor words_;
  nn::ParameterStore store_;
  std::optional<SequenceEncoder> action_statement_, action_scene_;
  std::optional<SequenceEncoder> dialogue_statement_, dialogue_scene_;
  std::optional<SequenceEncoder> statement_, scene_;  // HAN: one channel
  std::optional<SequenceEncoder> script_;
  Tensor characters_;  // [num_characters x character_dim]
  std::size_t channel_dim_ = 0;
  std::size_t scene_dim_ = 0;
};

}  // namespace scriptenc::encoders

#include "scriptenc/encoders.hpp"

#include <algorithm>

#include "scriptenc/error.hpp"

namespace scriptenc::encoders {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::BoE: return "boe";
    case EncoderKind::BoEAttn: return "boe_attn";
    case EncoderKind::GRU: return "gru";
    case EncoderKind::GRUAttn: return "gru_attn";
  }
  return "gru_attn";
}

std::string to_string(AttentionNorm n) { return n == AttentionNorm::Softmax ? "softmax" : "linear"; }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::PlusChars: return "plus_chars";
    case Variant::MinusAction: return "minus_action";
    case Variant::MinusDialogue: return "minus_dialogue";
    case Variant::TwoTier: return "two_tier";
    case Variant::Han: return "han";
  }
  return "full";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  for (auto k : {EncoderKind::BoE, EncoderKind::BoEAttn, EncoderKind::GRU, EncoderKind::GRUAttn})
    if (to_string(k) == s) return k;
  throw Error("UnknownEncoder", "unknown encoder kind '" + s + "' (boe, boe_attn, gru, gru_attn)");
}

AttentionNorm parse_attention_norm(const std::string& s) {
  if (s == "softmax") return AttentionNorm::Softmax;
  if (s == "linear") return AttentionNorm::Linear;
  throw Error("UnknownNormalization", "unknown attention normalization '" + s + "' (softmax, linear)");
}

Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::Full, Variant::PlusChars, Variant::MinusAction, Variant::MinusDialogue, Variant::TwoTier,
                 Variant::Han})
    if (to_string(v) == s) return v;
  throw Error("UnknownVariant", "unknown model variant '" + s + "'");
}

std::size_t EncoderSpec::output_dim() const {
  return (kind == EncoderKind::GRU || kind == EncoderKind::GRUAttn) ? 2 * hidden_per_direction : input_dim;
}

std::size_t EncoderSpec::attended_dim() const {
  return kind == EncoderKind::GRUAttn ? 2 * hidden_per_direction : input_dim;
}

Attention attend(const Tensor& outputs, const Tensor& p, AttentionNorm norm) {
  auto scores = ad::matvec(outputs, p);
  Attention a;
  a.weights = norm == AttentionNorm::Softmax ? ad::softmax(scores) : ad::sum_normalize(scores);
  a.pooled = ad::vecmat(a.weights, outputs);
  return a;
}

SequenceEncoder SequenceEncoder::create(nn::ParameterStore& store, const std::string& name, const EncoderSpec& spec,
                                        Rng& rng) {
  SequenceEncoder e;
  e.spec_ = spec;
  const bool recurrent = spec.kind == EncoderKind::GRU || spec.kind == EncoderKind::GRUAttn;
  const bool attentive = spec.kind == EncoderKind::BoEAttn || spec.kind == EncoderKind::GRUAttn;
  if (recurrent) e.gru_ = nn::BiGru::create(store, name + ".gru", spec.input_dim, spec.hidden_per_direction, rng);
  if (attentive) {
    if (spec.attention_dim != spec.attended_dim()) {
      throw Error("ShapeMismatch", name + ": attention_dim " + std::to_string(spec.attention_dim) +
                                       " differs from attended dim " + std::to_string(spec.attended_dim()));
    }
    // p is a vector; Glorot over a [1 x n] fan.
    e.attention_ = store.add(name + ".p", {spec.attention_dim}, nn::glorot_uniform(1, spec.attention_dim, rng));
  }
  return e;
}

Encoding SequenceEncoder::encode(const Tensor& inputs) const {
  if (inputs.rank() != 2 || inputs.cols() != spec_.input_dim) {
    throw Error("ShapeMismatch", "encoder expects [T x " + std::to_string(spec_.input_dim) + "] input, got " +
                                     ad::shape_string(inputs.shape()));
  }
  Encoding out;
  switch (spec_.kind) {
    case EncoderKind::BoE:
      out.output = ad::mean_rows(inputs);
      break;
    case EncoderKind::BoEAttn: {
      auto a = attend(inputs, attention_, spec_.attention_normalization);
      out.output = a.pooled;
      out.weights = a.weights;
      break;
    }
    case EncoderKind::GRU:
    case EncoderKind::GRUAttn: {
      std::vector<Tensor> steps;
      steps.reserve(inputs.rows());
      for (std::size_t t = 0; t < inputs.rows(); ++t) steps.push_back(ad::row(inputs, t));
      auto c = gru_->run(steps);
      if (spec_.kind == EncoderKind::GRU) {
        out.output = c.back();
      } else {
        auto a = attend(ad::stack(c), attention_, spec_.attention_normalization);
        out.output = a.pooled;
        out.weights = a.weights;
      }
      break;
    }
  }
  return out;
}

// ---- documents ---------------------------------------------------------------

CharacterTable CharacterTable::build(const std::vector<screenplay::Screenplay>& scripts) {
  std::vector<std::string> names;
  for (const auto& sp : scripts)
    for (const auto& sc : sp.scenes)
      for (const auto& n : sc.characters()) names.push_back(n);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return from_names(std::move(names));
}

CharacterTable CharacterTable::from_names(std::vector<std::string> names) {
  CharacterTable t;
  for (auto& n : names) {
    if (t.index_.count(n) || n == "<unk>") continue;
    t.index_[n] = t.names_.size();
    t.names_.push_back(std::move(n));
  }
  return t;
}

std::size_t CharacterTable::id(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? kUnk : it->second;
}

EncodedScene encode_scene_tokens(const screenplay::Scene& scene, const text::Vocabulary& vocab,
                                 const CharacterTable& chars) {
  EncodedScene out;
  for (const auto& st : scene.statements) {
    auto ids = vocab.encode(st.text);
    if (ids.empty()) continue;
    if (st.kind == screenplay::StatementKind::Dialogue) out.dialogue.push_back(ids);
    else out.action.push_back(ids);
    out.all.push_back(std::move(ids));
  }
  for (const auto& name : scene.characters()) out.characters.push_back(chars.id(name));
  return out;
}

EncodedScript encode_tokens(const screenplay::Screenplay& sp, const text::Vocabulary& vocab,
                            const CharacterTable& chars) {
  EncodedScript out;
  out.title = sp.title;
  for (const auto& sc : sp.scenes) out.scenes.push_back(encode_scene_tokens(sc, vocab, chars));
  return out;
}

// ---- model ----------------------------------------------------------------------

nlohmann::json ModelConfig::to_json() const {
  return {{"kind", to_string(encoder.kind)},
          {"input_dim", encoder.input_dim},
          {"hidden_per_direction", encoder.hidden_per_direction},
          {"attention_normalization", to_string(encoder.attention_normalization)},
          {"variant", to_string(variant)},
          {"characters", uses_characters()},
          {"character_dim", character_dim}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  c.encoder.input_dim = j.at("input_dim").get<std::size_t>();
  c.encoder.hidden_per_direction = j.at("hidden_per_direction").get<std::size_t>();
  c.encoder.attention_normalization = parse_attention_norm(j.at("attention_normalization").get<std::string>());
  c.encoder.attention_dim = c.encoder.attended_dim();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.characters = j.value("characters", false);
  c.character_dim = j.value("character_dim", std::size_t{10});
  return c;
}

namespace {

EncoderSpec tier_spec(const EncoderSpec& base, std::size_t input_dim) {
  EncoderSpec s = base;
  s.input_dim = input_dim;
  s.attention_dim = s.attended_dim();
  return s;
}

}  // namespace

HierarchicalModel::HierarchicalModel(ModelConfig config, Tensor word_embeddings, std::size_t num_characters, Rng& rng)
    : config_(std::move(config)), words_(std::move(word_embeddings)) {
  const auto& base = config_.encoder;
  if (words_.rank() != 2 || words_.cols() != base.input_dim) {
    throw Error("ShapeMismatch", "word embeddings " + ad::shape_string(words_.shape()) +
                                     " do not match encoder input_dim " + std::to_string(base.input_dim));
  }
  const std::size_t word_dim = base.input_dim;
  const auto stmt_spec = tier_spec(base, word_dim);
  const auto scene_spec = tier_spec(base, stmt_spec.output_dim());

  const bool action = config_.variant != Variant::MinusAction && config_.variant != Variant::Han;
  const bool dialogue = config_.variant != Variant::MinusDialogue && config_.variant != Variant::Han;
  std::size_t blocks = 0;

  if (config_.variant == Variant::Han) {
    statement_ = SequenceEncoder::create(store_, "statement", stmt_spec, rng);
    scene_ = SequenceEncoder::create(store_, "scene", scene_spec, rng);
    channel_dim_ = scene_->output_dim();
    blocks = channel_dim_;
  } else if (config_.variant == Variant::TwoTier) {
    const auto direct = tier_spec(base, word_dim);
    action_scene_ = SequenceEncoder::create(store_, "action_scene", direct, rng);
    dialogue_scene_ = SequenceEncoder::create(store_, "dialogue_scene", direct, rng);
    channel_dim_ = direct.output_dim();
    blocks = 2 * channel_dim_;
  } else {
    if (action) {
      action_statement_ = SequenceEncoder::create(store_, "action_statement", stmt_spec, rng);
      action_scene_ = SequenceEncoder::create(store_, "action_scene", scene_spec, rng);
      blocks += scene_spec.output_dim();
    }
    if (dialogue) {
      dialogue_statement_ = SequenceEncoder::create(store_, "dialogue_statement", stmt_spec, rng);
      dialogue_scene_ = SequenceEncoder::create(store_, "dialogue_scene", scene_spec, rng);
      blocks += scene_spec.output_dim();
    }
    channel_dim_ = scene_spec.output_dim();
  }
  if (config_.uses_characters()) {
    characters_ = store_.glorot("characters", std::max<std::size_t>(num_characters, 1), config_.character_dim, rng);
    blocks += config_.character_dim;
  }
  scene_dim_ = blocks;
  script_ = SequenceEncoder::create(store_, "script", tier_spec(base, scene_dim_), rng);
}

Tensor HierarchicalModel::encode_statement(const TokenIds& tokens, const SequenceEncoder& encoder) const {
  if (tokens.empty()) throw Error("EmptyStatement", "statement has no tokens");
  return encoder.encode(ad::gather_rows(words_, tokens)).output;
}

Tensor HierarchicalModel::channel(const std::vector<TokenIds>& statements, const std::optional<SequenceEncoder>& stmt,
                                  const SequenceEncoder& scene, std::vector<Tensor>& weights) const {
  if (statements.empty()) return Tensor::zeros({scene.output_dim()});
  Tensor inputs;
  if (stmt) {
    std::vector<Tensor> rows;
    rows.reserve(statements.size());
    for (const auto& s : statements) rows.push_back(encode_statement(s, *stmt));
    inputs = ad::stack(rows);
  } else {
    TokenIds joined;
    for (const auto& s : statements) joined.insert(joined.end(), s.begin(), s.end());
    inputs = ad::gather_rows(words_, joined);
  }
  auto enc = scene.encode(inputs);
  if (enc.weights.defined()) weights.push_back(enc.weights);
  return enc.output;
}

SceneEncoding HierarchicalModel::encode_scene(const EncodedScene& scene) const {
  SceneEncoding out;
  std::vector<Tensor> blocks;
  if (scene_) {
    blocks.push_back(channel(scene.all, statement_, *scene_, out.block_weights));
  } else {
    if (action_scene_) blocks.push_back(channel(scene.action, action_statement_, *action_scene_, out.block_weights));
    if (dialogue_scene_)
      blocks.push_back(channel(scene.dialogue, dialogue_statement_, *dialogue_scene_, out.block_weights));
  }
  if (config_.uses_characters()) {
    if (scene.characters.empty()) {
      blocks.push_back(Tensor::zeros({config_.character_dim}));
    } else {
      blocks.push_back(ad::mean_rows(ad::gather_rows(characters_, scene.characters)));
    }
  }
  out.embedding = blocks.size() == 1 ? blocks.front() : ad::concat(blocks);
  return out;
}

ScriptEncoding HierarchicalModel::encode_script(const EncodedScript& script) const {
  if (script.scenes.empty()) throw Error("EmptyScript", "script '" + script.title + "' has no scenes");
  ScriptEncoding out;
  out.scenes.reserve(script.scenes.size());
  for (const auto& sc : script.scenes) out.scenes.push_back(encode_scene(sc).embedding);
  auto enc = script_->encode(ad::stack(out.scenes));
  out.embedding = enc.output;
  out.scene_weights = enc.weights;
  return out;
}

}  // namespace scriptenc::encoders

#include "scriptenc/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "scriptenc/error.hpp"
#include "scriptenc/optim.hpp"
#include "scriptenc/parallel.hpp"

namespace scriptenc::descriptors {

Predictor Predictor::create(nn::ParameterStore& store, const std::string& name, const PredictorConfig& config,
                            Rng& rng) {
  if (config.k == 0) throw Error("InvalidArgument", "predictor: k must be positive");
  Predictor p;
  p.config_ = config;
  const std::size_t in = config.input_dim + (config.recurrent ? config.k : 0);
  p.hidden_ = nn::Linear::create(store, name + ".hidden", in, config.hidden, rng);
  p.out_ = nn::Linear::create(store, name + ".out", config.hidden, config.k, rng);
  return p;
}

Tensor Predictor::ffnn(const Tensor& input) const { return ad::softmax(out_(ad::relu(hidden_(input)))); }

Tensor Predictor::operator()(const Tensor& v, const Tensor& o_prev) const {
  if (!config_.recurrent) return ffnn(v);
  if (!o_prev.defined() || o_prev.size() != config_.k) {
    throw Error("ShapeMismatch", "predictor: recurrent step needs o_prev of size " + std::to_string(config_.k));
  }
  const Tensor f = ffnn(ad::concat({v, o_prev}));
  return ad::scale(f, 1.0 - config_.alpha) + ad::scale(o_prev, config_.alpha);
}

Tensor uniform_weights(std::size_t k) {
  return Tensor::constant({k}, std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

Tensor reconstruct(const Tensor& o, const Tensor& R) { return ad::vecmat(o, R); }

Tensor orthogonality_penalty(const Tensor& R) {
  const std::size_t k = R.rows();
  std::vector<double> eye(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = 1.0;
  return ad::frobenius_norm(ad::matmul(R, ad::transpose(R)) - Tensor::constant({k, k}, std::move(eye)));
}

Tensor hinge_loss(const Tensor& w, const Tensor& u, const std::vector<Tensor>& negatives) {
  if (negatives.empty()) throw Error("InvalidArgument", "hinge loss needs at least one negative");
  const Tensor positive = ad::dot(w, u);
  std::vector<Tensor> terms;
  terms.reserve(negatives.size());
  for (const auto& neg : negatives) {
    terms.push_back(ad::relu(ad::add_scalar(ad::dot(w, neg) - positive, 1.0)));
  }
  return ad::add_n(terms);
}

Tensor descriptor_loss(const Tensor& w, const Tensor& u, const std::vector<Tensor>& negatives, const Tensor& R,
                       double lambda) {
  return hinge_loss(w, u, negatives) + ad::scale(orthogonality_penalty(R), lambda);
}

// ---- initialization and interpretation --------------------------------------------

std::string to_string(InitMode mode) { return mode == InitMode::KMeans ? "kmeans" : "random_glorot"; }

InitMode parse_init_mode(const std::string& s) {
  if (s == "kmeans") return InitMode::KMeans;
  if (s == "random_glorot" || s == "glorot") return InitMode::RandomGlorot;
  throw Error("UnknownInit", "unknown descriptor init '" + s + "' (kmeans, random_glorot)");
}

namespace {

double sq_dist(const std::vector<double>& a, const double* b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> kmeans(const std::vector<std::vector<double>>& points, std::size_t k, Rng& rng,
                           std::size_t max_iter) {
  const std::size_t n = points.size();
  if (k == 0) throw Error("InvalidArgument", "kmeans: k must be positive");
  if (n < k) {
    throw Error("InsufficientVocab",
                "kmeans: " + std::to_string(n) + " points for " + std::to_string(k) + " clusters");
  }
  const std::size_t d = points.front().size();
  std::vector<double> centroids(k * d);

  // k-means++ seeding
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(points[pick].begin(), points[pick].end(), centroids.begin() + c * d);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(points[i], &centroids[c * d]));
      total += best[i];
    }
    if (c + 1 == k) break;
    if (total <= 0) {
      pick = rng.below(n);
      continue;
    }
    double target = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (best[i] <= 0) continue;
      target -= best[i];
      if (target < 0) {
        pick = i;
        break;
      }
    }
    while (best[pick] <= 0 && pick > 0) --pick;
  }

  std::vector<std::size_t> assign(n, k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = sq_dist(points[i], &centroids[c * d]);
        if (dist < bd) {
          bd = dist;
          arg = c;
        }
      }
      if (assign[i] != arg) {
        assign[i] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sums(k * d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < d; ++j) sums[assign[i] * d + j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // an emptied cluster keeps its centroid
      for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
    }
  }
  return centroids;
}

std::vector<double> init_descriptors(InitMode mode, const std::vector<std::vector<double>>& vocab_embeddings,
                                     std::size_t k, std::uint64_t seed) {
  if (vocab_embeddings.empty()) throw Error("InsufficientVocab", "descriptor init: empty vocabulary");
  Rng rng(seed);
  if (mode == InitMode::KMeans) return kmeans(vocab_embeddings, k, rng);
  return nn::glorot_uniform(k, vocab_embeddings.front().size(), rng);
}

std::vector<std::vector<std::string>> nearest_words(std::span<const double> R, std::size_t k,
                                                    const std::vector<std::string>& tokens,
                                                    const std::vector<std::vector<double>>& embeddings,
                                                    std::size_t m) {
  if (tokens.size() != embeddings.size()) throw Error("ShapeMismatch", "nearest_words: tokens and embeddings differ");
  std::vector<std::vector<std::string>> out(k);
  if (m == 0 || tokens.empty()) return out;
  const std::size_t d = R.size() / k;
  std::vector<double> norms(tokens.size());
  for (std::size_t w = 0; w < tokens.size(); ++w) norms[w] = norm(embeddings[w]);

  for (std::size_t r = 0; r < k; ++r) {
    const auto row = R.subspan(r * d, d);
    const double rn = norm(row);
    std::vector<std::pair<double, std::size_t>> sims;
    sims.reserve(tokens.size());
    for (std::size_t w = 0; w < tokens.size(); ++w) {
      double dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += row[j] * embeddings[w][j];
      const double denom = rn * norms[w];
      sims.emplace_back(denom > 0 ? dot / denom : 0.0, w);
    }
    const std::size_t take = std::min(m, sims.size());
    std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(take), sims.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return tokens[a.second] < tokens[b.second];
                      });
    for (std::size_t i = 0; i < take; ++i) out[r].push_back(tokens[sims[i].second]);
  }
  return out;
}

CooccurrenceIndex CooccurrenceIndex::build(const std::vector<std::vector<std::string>>& documents) {
  CooccurrenceIndex idx;
  idx.documents_ = documents.size();
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const std::set<std::string> unique(documents[d].begin(), documents[d].end());
    for (const auto& w : unique) idx.postings_[w].push_back(d);
  }
  return idx;
}

std::size_t CooccurrenceIndex::df(const std::string& w) const {
  auto it = postings_.find(w);
  return it == postings_.end() ? 0 : it->second.size();
}

std::size_t CooccurrenceIndex::co_df(const std::string& a, const std::string& b) const {
  auto ia = postings_.find(a), ib = postings_.find(b);
  if (ia == postings_.end() || ib == postings_.end()) return 0;
  std::size_t n = 0;
  auto x = ia->second.begin(), y = ib->second.begin();
  while (x != ia->second.end() && y != ib->second.end()) {
    if (*x < *y) {
      ++x;
    } else if (*y < *x) {
      ++y;
    } else {
      ++n, ++x, ++y;
    }
  }
  return n;
}

double semantic_coherence(const std::vector<std::string>& cluster, const CooccurrenceIndex& index) {
  for (const auto& w : cluster) {
    if (index.df(w) == 0) throw Error("ZeroDocFrequency", "coherence: '" + w + "' occurs in no document");
  }
  double score = 0;
  for (std::size_t m = 1; m < cluster.size(); ++m) {
    for (std::size_t l = 0; l < m; ++l) {
      const double co = static_cast<double>(index.co_df(cluster[m], cluster[l]));
      score += std::log((co + 1.0) / static_cast<double>(index.df(cluster[l])));
    }
  }
  return score;
}

std::vector<double> semantic_coherence(const std::vector<std::vector<std::string>>& clusters,
                                       const CooccurrenceIndex& index) {
  std::vector<double> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(semantic_coherence(c, index));
  return out;
}

std::vector<std::string> descriptor_vocabulary(const std::vector<std::vector<std::string>>& movies,
                                               std::size_t min_movies, std::size_t skip_top) {
  std::map<std::string, std::size_t> total, in_movies;
  for (const auto& movie : movies) {
    for (const auto& t : movie) ++total[t];
    for (const auto& t : std::set<std::string>(movie.begin(), movie.end())) ++in_movies[t];
  }
  std::vector<std::pair<std::string, std::size_t>> by_freq(total.begin(), total.end());
  std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::set<std::string> frequent;
  for (std::size_t i = 0; i < std::min(skip_top, by_freq.size()); ++i) frequent.insert(by_freq[i].first);

  std::vector<std::string> out;
  for (const auto& [tok, n] : in_movies) {
    if (n >= min_movies && !frequent.contains(tok)) out.push_back(tok);
  }
  return out;
}

// ---- reconstruction target ------------------------------------------------------------

ReconstructionTarget::ReconstructionTarget(const encoders::HierarchicalModel& model, std::vector<bool> allowed)
    : model_(&model), allowed_(std::move(allowed)) {
  if (model.scene_dim() != model.word_embeddings().cols()) {
    throw Error("ShapeMismatch", "reconstruction target must embed scenes in word space (scene dim " +
                                     std::to_string(model.scene_dim()) + ", word dim " +
                                     std::to_string(model.word_embeddings().cols()) + ")");
  }
  if (allowed_.size() != model.word_embeddings().rows()) {
    throw Error("ShapeMismatch", "reconstruction target: allowed mask does not match the vocabulary");
  }
}

std::vector<double> ReconstructionTarget::scene(const encoders::EncodedScene& scene) const {
  auto restrict = [&](const std::vector<encoders::TokenIds>& statements) {
    std::vector<encoders::TokenIds> out;
    for (const auto& s : statements) {
      encoders::TokenIds kept;
      for (std::size_t id : s)
        if (id < allowed_.size() && allowed_[id]) kept.push_back(id);
      if (!kept.empty()) out.push_back(std::move(kept));
    }
    return out;
  };
  encoders::EncodedScene filtered;
  filtered.action = restrict(scene.action);
  filtered.dialogue = restrict(scene.dialogue);
  filtered.all = restrict(scene.all);
  filtered.characters = scene.characters;
  const Tensor e = model_->encode_scene(filtered).embedding;
  return {e.value().begin(), e.value().end()};
}

std::vector<std::vector<double>> ReconstructionTarget::script(const encoders::EncodedScript& script) const {
  std::vector<std::vector<double>> out(script.scenes.size());
  parallel_for(script.scenes.size(), [&](std::size_t t) { out[t] = scene(script.scenes[t]); });
  return out;
}

// ---- model and training -----------------------------------------------------------------

nlohmann::json DescriptorConfig::to_json() const {
  return {{"k", k},          {"hidden", hidden},       {"recurrent", recurrent}, {"alpha", alpha},
          {"lambda", lambda}, {"negatives", negatives}, {"epochs", epochs},       {"lr", lr},
          {"max_norm", max_norm}, {"init", to_string(init)}, {"seed", seed}};
}

DescriptorModel::DescriptorModel(const DescriptorConfig& config, std::size_t input_dim, std::size_t word_dim,
                                 std::vector<double> r_init)
    : config_(config) {
  if (r_init.size() != config.k * word_dim) {
    throw Error("ShapeMismatch", "descriptor init has " + std::to_string(r_init.size()) + " values, expected " +
                                     std::to_string(config.k) + "x" + std::to_string(word_dim));
  }
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  r_ = store_.add("descriptors", {config.k, word_dim}, std::move(r_init));
  PredictorConfig pc;
  pc.input_dim = input_dim;
  pc.k = config.k;
  pc.hidden = config.hidden;
  pc.recurrent = config.recurrent;
  pc.alpha = config.alpha;
  predictor_ = Predictor::create(store_, "predictor", pc, rng);
}

std::vector<Tensor> DescriptorModel::weights(const std::vector<Tensor>& scenes) const {
  std::vector<Tensor> out;
  out.reserve(scenes.size());
  Tensor prev = uniform_weights(config_.k);
  for (const auto& v : scenes) {
    prev = predictor_(v, prev);
    out.push_back(prev);
  }
  return out;
}

std::vector<std::vector<double>> DescriptorModel::infer(const std::vector<std::vector<double>>& scenes) const {
  std::vector<Tensor> inputs;
  inputs.reserve(scenes.size());
  for (const auto& v : scenes) inputs.push_back(Tensor::vector(v));
  std::vector<std::vector<double>> out;
  for (const auto& o : weights(inputs)) out.emplace_back(o.value().begin(), o.value().end());
  return out;
}

DescriptorTrainStats train_descriptors(DescriptorModel& model, const std::vector<ScriptScenes>& data) {
  const auto& cfg = model.config();
  if (cfg.negatives == 0) throw Error("InvalidArgument", "descriptor training needs n >= 1 negatives");
  DescriptorTrainStats stats;
  stats.initial_penalty = orthogonality_penalty(model.R()).item();

  std::vector<Tensor> params = model.params().tensors();
  optim::AdamState adam = optim::make_adam_state(params, optim::AdamConfig{.lr = cfg.lr});
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0;
    std::size_t counted = 0;
    for (std::size_t s : order) {
      const auto& script = data[s];
      const std::size_t T = script.v.size();
      if (script.u.size() != T) throw Error("ShapeMismatch", "descriptor data: v and u scene counts differ");
      if (T < 2) {
        if (epoch == 0) ++stats.skipped_scripts;
        continue;
      }
      const std::size_t n = std::min(cfg.negatives, T - 1);
      if (n < cfg.negatives && epoch == 0) ++stats.reduced_negative_scripts;

      std::vector<Tensor> v, u;
      for (std::size_t t = 0; t < T; ++t) {
        v.push_back(Tensor::vector(script.v[t]));
        u.push_back(Tensor::vector(script.u[t]));
      }
      const auto o = model.weights(v);
      std::vector<Tensor> hinges;
      hinges.reserve(T);
      for (std::size_t t = 0; t < T; ++t) {
        double sum = 0, lo = std::numeric_limits<double>::infinity();
        for (double x : o[t].value()) {
          sum += x;
          lo = std::min(lo, x);
        }
        stats.max_simplex_error = std::max(stats.max_simplex_error, std::abs(sum - 1.0));
        stats.min_weight = std::min(stats.min_weight, lo);

        std::vector<Tensor> negs;
        for (std::size_t j : rng.sample_without_replacement(T - 1, n)) negs.push_back(u[j >= t ? j + 1 : j]);
        hinges.push_back(hinge_loss(reconstruct(o[t], model.R()), u[t], negs));
      }
      const Tensor loss = ad::add_n(hinges) + ad::scale(orthogonality_penalty(model.R()), cfg.lambda);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw Error("NonFiniteLoss", "descriptor loss is not finite at epoch " + std::to_string(epoch + 1) +
                                         ", script " + std::to_string(s));
      }
      total += value;
      ++counted;
      optim::zero_grad(params);
      ad::backward(loss);
      optim::clip_grad_norm(params, cfg.max_norm);
      optim::adam_step(adam, params);
      ++stats.steps;
    }
    stats.epoch_loss.push_back(counted ? total / static_cast<double>(counted) : 0.0);
    stats.penalty.push_back(orthogonality_penalty(model.R()).item());
  }
  return stats;
}

nlohmann::json descriptor_report(const std::vector<std::vector<std::string>>& words,
                                 const std::vector<double>& coherence) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.push_back({{"index", i}, {"top_words", words[i]}, {"coherence", i < coherence.size() ? coherence[i] : 0.0}});
  }
  return out;
}

}  // namespace scriptenc::descriptors

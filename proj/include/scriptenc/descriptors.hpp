#pragma once

// Scene descriptors: each scene embedding is explained as a mixture o_t over
// k descriptor rows of R, trained to reconstruct a frozen bag-of-words scene
// vector u_t against negatives drawn from the same script.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "scriptenc/autodiff.hpp"
#include "scriptenc/encoders.hpp"
#include "scriptenc/nn.hpp"
#include "scriptenc/rng.hpp"

namespace scriptenc::descriptors {

using ad::Tensor;

struct PredictorConfig {
  std::size_t input_dim = 100;
  std::size_t k = 25;
  std::size_t hidden = 100;
  bool recurrent = true;
  double alpha = 0.5;
};

// Two-layer FFNN (ReLU, then softmax over k). In recurrent mode the input is
// [v_t ; o_{t-1}] and the output is mixed with o_{t-1}:
//   o_t = (1 - alpha) FFNN([v_t ; o_{t-1}]) + alpha o_{t-1}
class Predictor {
 public:
  static Predictor create(nn::ParameterStore& store, const std::string& name, const PredictorConfig& config, Rng& rng);

  Tensor ffnn(const Tensor& input) const;
  // o_prev is ignored (and may be undefined) when not recurrent.
  Tensor operator()(const Tensor& v, const Tensor& o_prev) const;
  const PredictorConfig& config() const { return config_; }

 private:
  PredictorConfig config_;
  nn::Linear hidden_;
  nn::Linear out_;
};

Tensor uniform_weights(std::size_t k);

// w_t = R^T o_t
Tensor reconstruct(const Tensor& o, const Tensor& R);

// || R R^T - I ||_F
Tensor orthogonality_penalty(const Tensor& R);

// sum_j max(0, 1 - w.u + w.u_j) + lambda ||R R^T - I||_F
Tensor descriptor_loss(const Tensor& w, const Tensor& u, const std::vector<Tensor>& negatives, const Tensor& R,
                       double lambda = 10.0);

// Hinge part only, summed over negatives.
Tensor hinge_loss(const Tensor& w, const Tensor& u, const std::vector<Tensor>& negatives);

// ---- initialization and interpretation ------------------------------------------

enum class InitMode { RandomGlorot, KMeans };
std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& s);

// Lloyd's algorithm with k-means++ seeding; stops when assignments settle
// or after max_iter rounds. Returns k centroids, row-major k x d.
std::vector<double> kmeans(const std::vector<std::vector<double>>& points, std::size_t k, Rng& rng,
                           std::size_t max_iter = 100);

// k x d initial descriptor matrix. KMeans needs at least k points.
std::vector<double> init_descriptors(InitMode mode, const std::vector<std::vector<double>>& vocab_embeddings,
                                     std::size_t k, std::uint64_t seed);

// Top-m tokens by cosine similarity to each row of R (k x d values); ties
// go to the lexicographically smaller token.
std::vector<std::vector<std::string>> nearest_words(std::span<const double> R, std::size_t k,
                                                    const std::vector<std::string>& tokens,
                                                    const std::vector<std::vector<double>>& embeddings,
                                                    std::size_t m);

// Document frequencies over a set of documents (scenes, by default).
class CooccurrenceIndex {
 public:
  static CooccurrenceIndex build(const std::vector<std::vector<std::string>>& documents);
  std::size_t df(const std::string& w) const;
  std::size_t co_df(const std::string& a, const std::string& b) const;
  std::size_t documents() const { return documents_; }

 private:
  std::map<std::string, std::vector<std::size_t>> postings_;
  std::size_t documents_ = 0;
};

// Mimno coherence: sum_{m=2..M} sum_{l<m} log((D(w_m, w_l) + 1) / D(w_l)).
double semantic_coherence(const std::vector<std::string>& cluster, const CooccurrenceIndex& index);
std::vector<double> semantic_coherence(const std::vector<std::vector<std::string>>& clusters,
                                       const CooccurrenceIndex& index);

// Tokens appearing in at least min_movies movies, excluding the skip_top most
// frequent tokens overall (ties by token). `movies` holds each movie's tokens.
std::vector<std::string> descriptor_vocabulary(const std::vector<std::vector<std::string>>& movies,
                                               std::size_t min_movies = 50, std::size_t skip_top = 500);

// ---- reconstruction target --------------------------------------------------------

// Frozen scene encoder whose output lives in word space (HAN + BoE+Attn),
// fed only tokens from the descriptor vocabulary.
class ReconstructionTarget {
 public:
  // allowed[id] marks vocabulary ids that survive the restriction.
  ReconstructionTarget(const encoders::HierarchicalModel& model, std::vector<bool> allowed);

  std::vector<double> scene(const encoders::EncodedScene& scene) const;
  std::vector<std::vector<double>> script(const encoders::EncodedScript& script) const;
  std::size_t dim() const { return model_->scene_dim(); }

 private:
  const encoders::HierarchicalModel* model_;
  std::vector<bool> allowed_;
};

// ---- model and training -------------------------------------------------------------

struct DescriptorConfig {
  std::size_t k = 25;
  std::size_t hidden = 100;
  bool recurrent = true;
  double alpha = 0.5;
  double lambda = 10.0;
  std::size_t negatives = 5;
  std::size_t epochs = 10;
  double lr = 5e-3;
  double max_norm = 5.0;
  InitMode init = InitMode::KMeans;
  std::uint64_t seed = 13;

  nlohmann::json to_json() const;
};

class DescriptorModel {
 public:
  // r_init: k x word_dim row-major.
  DescriptorModel(const DescriptorConfig& config, std::size_t input_dim, std::size_t word_dim,
                  std::vector<double> r_init);

  DescriptorModel(const DescriptorModel&) = delete;
  DescriptorModel& operator=(const DescriptorModel&) = delete;

  // o_t for each scene embedding row, starting from a uniform o_0.
  std::vector<Tensor> weights(const std::vector<Tensor>& scenes) const;
  std::vector<std::vector<double>> infer(const std::vector<std::vector<double>>& scenes) const;

  const Tensor& R() const { return r_; }
  const Predictor& predictor() const { return predictor_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  const DescriptorConfig& config() const { return config_; }

 private:
  DescriptorConfig config_;
  nn::ParameterStore store_;
  Tensor r_;
  Predictor predictor_;
};

// Per-script scene inputs v_t and reconstruction targets u_t.
struct ScriptScenes {
  std::vector<std::vector<double>> v;
  std::vector<std::vector<double>> u;
};

struct DescriptorTrainStats {
  std::vector<double> epoch_loss;     // mean per-script loss
  std::vector<double> penalty;        // ||RR^T - I||_F after each epoch
  double initial_penalty = 0.0;
  double max_simplex_error = 0.0;     // max |sum o_t - 1| over every o_t seen in training
  double min_weight = 1.0;            // min entry of every o_t seen in training
  std::size_t steps = 0;
  std::size_t reduced_negative_scripts = 0;  // scripts with fewer than n+1 scenes
  std::size_t skipped_scripts = 0;           // single-scene scripts (no negatives at all)
};

// One Adam step per script; loss = sum_t hinge_t + lambda * penalty.
DescriptorTrainStats train_descriptors(DescriptorModel& model, const std::vector<ScriptScenes>& data);

nlohmann::json descriptor_report(const std::vector<std::vector<std::string>>& words,
                                 const std::vector<double>& coherence);

}  // namespace scriptenc::descriptors

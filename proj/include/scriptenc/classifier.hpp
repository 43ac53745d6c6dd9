#pragma once

// Multi-label tag prediction: label bookkeeping, the reweighted one-vs-rest
// loss, thresholded prediction, micro average precision and the training loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scriptenc/autodiff.hpp"
#include "scriptenc/encoders.hpp"
#include "scriptenc/nn.hpp"
#include "scriptenc/optim.hpp"

namespace scriptenc::classifier {

using ad::Tensor;

// N x L binary matrix, row-major.
struct LabelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> y;

  LabelMatrix() = default;
  LabelMatrix(std::size_t n, std::size_t l) : rows(n), cols(l), y(n * l, 0.0) {}
  double at(std::size_t i, std::size_t j) const { return y[i * cols + j]; }
  void set(std::size_t i, std::size_t j, bool v) { y[i * cols + j] = v ? 1.0 : 0.0; }
  std::span<const double> row(std::size_t i) const { return {y.data() + i * cols, cols}; }
};

struct TagTaxonomy {
  std::string attribute;
  std::vector<std::string> tags;
  std::vector<double> ratios;  // lambda_j = positives / negatives over the training rows
  std::vector<bool> active;    // false when a tag has no positive (or no negative) training row

  // Computes ratios from the given training rows of `labels`.
  static TagTaxonomy build(std::string attribute, std::vector<std::string> tags, const LabelMatrix& labels,
                           std::span<const std::size_t> training_rows);
  std::size_t active_count() const;
};

enum class LossForm {
  Weighted,  // -(1/NL) sum [y log s(z) + lambda (1-y) log(1 - s(z))]
  Printed,   // (1/NL) sum [y log s(z) + lambda (1-y) (1 - log s(z))], kept for comparison only
};

// z: logits, [L] for one script or [N x L]; y: the matching N*L labels.
// Inactive tags contribute nothing and are excluded from the normalizer.
Tensor reweighted_loss(const Tensor& z, std::span<const double> y, std::span<const double> ratios,
                       const std::vector<bool>& active, LossForm form = LossForm::Weighted);

struct LossParts {
  double positive = 0.0;  // -(1/NL) sum y log s(z)
  double negative = 0.0;  // -(1/NL) sum lambda (1-y) log(1 - s(z))
};
LossParts reweighted_loss_parts(std::span<const double> z, std::span<const double> y, std::span<const double> ratios,
                                const std::vector<bool>& active);

// Tag j is predicted iff sigmoid(z_j) > threshold (strictly).
std::vector<std::uint8_t> predict_tags(std::span<const double> logits, double threshold = 0.5);

// Micro AP over all (script, tag) decisions: rank by descending score
// (stable in input order for ties) and average the precision at each positive.
double average_precision(std::span<const double> scores, std::span<const double> labels);

struct TrainConfig {
  double lr = 5e-3;
  double max_norm = 5.0;
  std::size_t max_epochs = 20;
  std::size_t patience = 5;
  double threshold = 0.5;
  std::uint64_t seed = 13;
  LossForm loss_form = LossForm::Weighted;
  bool record_wallclock = false;  // wallclock column is 0 otherwise, keeping logs byte-stable
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_ap = 0.0;
  double lr = 0.0;
  double wallclock = 0.0;
};

std::string log_csv(const std::vector<EpochLog>& log);

// Everything the loop needs: a forward pass from example index to logits
// [L], the parameters it touches, labels for all examples and the split.
struct TrainingProblem {
  nn::ParameterStore* params = nullptr;
  std::function<Tensor(std::size_t)> logits;
  const LabelMatrix* labels = nullptr;
  const TagTaxonomy* taxonomy = nullptr;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_ap = 0.0;
  std::size_t epochs_run = 0;
};

// Adam with gradient clipping, one script per step, early stopping on
// validation AP. On return the parameters hold the best-AP snapshot.
TrainResult train(TrainingProblem& problem, const TrainConfig& config);

// Logits for each listed example, evaluated concurrently.
std::vector<std::vector<double>> predict_logits(const std::function<Tensor(std::size_t)>& logits,
                                                std::span<const std::size_t> examples);

// Hierarchical encoder + linear head.
class TagModel {
 public:
  TagModel(encoders::ModelConfig config, Tensor word_embeddings, std::size_t num_characters, std::size_t num_tags,
           std::uint64_t seed);

  Tensor logits(const encoders::EncodedScript& script) const;
  encoders::HierarchicalModel& encoder() { return *encoder_; }
  const encoders::HierarchicalModel& encoder() const { return *encoder_; }
  nn::ParameterStore& params() { return encoder_->params(); }

 private:
  std::unique_ptr<encoders::HierarchicalModel> encoder_;
  nn::Linear head_;
};

// Bidirectional GRU (no attention) over logline tokens + linear head.
class LoglineModel {
 public:
  LoglineModel(Tensor word_embeddings, std::size_t hidden_per_direction, std::size_t num_tags, std::uint64_t seed);

  // Throws EmptyStatement for a logline without tokens.
  Tensor embed(const encoders::TokenIds& tokens) const;
  Tensor logits(const encoders::TokenIds& tokens) const;
  nn::ParameterStore& params() { return store_; }
  std::size_t embedding_dim() const { return encoder_.output_dim(); }

 private:
  Tensor words_;
  nn::ParameterStore store_;
  encoders::SequenceEncoder encoder_;
  nn::Linear head_;
};

}  // namespace scriptenc::classifier

#include "scriptenc/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"
#include "scriptenc/parallel.hpp"
#include "scriptenc/rng.hpp"

namespace scriptenc::classifier {

namespace {

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

std::size_t tag_count(const Tensor& z) { return z.rank() == 2 ? z.cols() : z.size(); }

void check_loss_inputs(std::size_t n, std::size_t l, std::span<const double> y, std::span<const double> ratios,
                       const std::vector<bool>& active) {
  if (y.size() != n * l || ratios.size() != l || active.size() != l) {
    throw Error("ShapeMismatch", "loss: logits cover " + std::to_string(n) + "x" + std::to_string(l) + " but got " +
                                     std::to_string(y.size()) + " labels, " + std::to_string(ratios.size()) +
                                     " ratios, " + std::to_string(active.size()) + " mask entries");
  }
}

double normalizer(std::size_t n, const std::vector<bool>& active) {
  const auto on = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
  if (on == 0 || n == 0) throw Error("NoActiveTags", "loss: every tag is masked out");
  return static_cast<double>(n * on);
}

}  // namespace

TagTaxonomy TagTaxonomy::build(std::string attribute, std::vector<std::string> tags, const LabelMatrix& labels,
                               std::span<const std::size_t> training_rows) {
  if (tags.size() != labels.cols) {
    throw Error("ShapeMismatch", "taxonomy has " + std::to_string(tags.size()) + " tags but labels have " +
                                     std::to_string(labels.cols) + " columns");
  }
  TagTaxonomy t;
  t.attribute = std::move(attribute);
  t.tags = std::move(tags);
  t.ratios.assign(labels.cols, 0.0);
  t.active.assign(labels.cols, false);
  for (std::size_t j = 0; j < labels.cols; ++j) {
    double pos = 0, neg = 0;
    for (std::size_t i : training_rows) (labels.at(i, j) > 0.5 ? pos : neg) += 1;
    t.active[j] = pos > 0 && neg > 0;
    t.ratios[j] = neg > 0 ? pos / neg : 0.0;
  }
  return t;
}

std::size_t TagTaxonomy::active_count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

Tensor reweighted_loss(const Tensor& z, std::span<const double> y, std::span<const double> ratios,
                       const std::vector<bool>& active, LossForm form) {
  const std::size_t l = tag_count(z);
  const std::size_t n = l == 0 ? 0 : z.size() / l;
  check_loss_inputs(n, l, y, ratios, active);
  const double nl = normalizer(n, active);

  std::vector<double> pos_w(z.size()), neg_w(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::size_t j = i % l;
    if (!active[j]) continue;
    pos_w[i] = y[i];
    neg_w[i] = ratios[j] * (1.0 - y[i]);
  }
  const Tensor log_p = ad::log_sigmoid(z);
  if (form == LossForm::Weighted) {
    const Tensor log_q = ad::log_sigmoid(ad::scale(z, -1.0));
    const Tensor total = ad::sum(ad::Tensor::constant(z.shape(), std::move(pos_w)) * log_p +
                                 ad::Tensor::constant(z.shape(), neg_w) * log_q);
    return ad::scale(total, -1.0 / nl);
  }
  // y log s + lambda (1-y)(1 - log s) = (y - w) log s + w
  const double w_total = std::accumulate(neg_w.begin(), neg_w.end(), 0.0);
  std::vector<double> coeff(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) coeff[i] = pos_w[i] - neg_w[i];
  const Tensor total = ad::add_scalar(ad::sum(ad::Tensor::constant(z.shape(), std::move(coeff)) * log_p), w_total);
  return ad::scale(total, 1.0 / nl);
}

LossParts reweighted_loss_parts(std::span<const double> z, std::span<const double> y, std::span<const double> ratios,
                                const std::vector<bool>& active) {
  const std::size_t l = ratios.size();
  const std::size_t n = l == 0 ? 0 : z.size() / l;
  check_loss_inputs(n, l, y, ratios, active);
  if (n * l != z.size()) throw Error("ShapeMismatch", "loss: logit count is not a multiple of the tag count");
  const double nl = normalizer(n, active);
  LossParts parts;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::size_t j = i % l;
    if (!active[j]) continue;
    parts.positive -= y[i] * log_sigmoid(z[i]);
    parts.negative -= ratios[j] * (1.0 - y[i]) * log_sigmoid(-z[i]);
  }
  parts.positive /= nl;
  parts.negative /= nl;
  return parts;
}

std::vector<std::uint8_t> predict_tags(std::span<const double> logits, double threshold) {
  std::vector<std::uint8_t> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const double s = 1.0 / (1.0 + std::exp(-logits[j]));
    out[j] = s > threshold ? 1 : 0;
  }
  return out;
}

double average_precision(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw Error("ShapeMismatch", "average_precision: " + std::to_string(scores.size()) + " scores vs " +
                                     std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0, sum = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] > 0.5) {
      hits += 1;
      sum += hits / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw Error("NoPositives", "average_precision: no positive labels");
  return sum / hits;
}

std::string log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,val_ap,lr,wallclock\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << io::format_double(e.train_loss) << ',' << io::format_double(e.val_ap) << ','
        << io::format_double(e.lr) << ',' << io::format_double(e.wallclock) << '\n';
  }
  return out.str();
}

std::vector<std::vector<double>> predict_logits(const std::function<Tensor(std::size_t)>& logits,
                                                std::span<const std::size_t> examples) {
  std::vector<std::vector<double>> out(examples.size());
  parallel_for(examples.size(), [&](std::size_t k) {
    const Tensor z = logits(examples[k]);
    out[k].assign(z.value().begin(), z.value().end());
  });
  return out;
}

namespace {

// Micro AP over active tags of the given examples.
double validation_ap(const TrainingProblem& p, std::span<const std::size_t> rows) {
  const auto z = predict_logits(p.logits, rows);
  std::vector<double> scores, labels;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t j = 0; j < p.labels->cols; ++j) {
      if (!p.taxonomy->active[j]) continue;
      scores.push_back(1.0 / (1.0 + std::exp(-z[k][j])));
      labels.push_back(p.labels->at(rows[k], j));
    }
  }
  return average_precision(scores, labels);
}

bool has_positive(const TrainingProblem& p, std::span<const std::size_t> rows) {
  for (std::size_t i : rows)
    for (std::size_t j = 0; j < p.labels->cols; ++j)
      if (p.taxonomy->active[j] && p.labels->at(i, j) > 0.5) return true;
  return false;
}

}  // namespace

TrainResult train(TrainingProblem& problem, const TrainConfig& config) {
  if (!problem.params || !problem.logits || !problem.labels || !problem.taxonomy) {
    throw Error("InvalidArgument", "train: incomplete training problem");
  }
  if (problem.train.empty()) throw Error("EmptySplit", "train: no training examples");
  if (problem.taxonomy->active_count() == 0) throw Error("NoActiveTags", "train: no tag has both classes in training");

  // Without a usable validation split, model selection falls back to the training rows.
  const std::vector<std::size_t>& select_rows =
      !problem.validation.empty() && has_positive(problem, problem.validation) ? problem.validation : problem.train;

  std::vector<Tensor> params = problem.params->tensors();
  optim::AdamState adam = optim::make_adam_state(params, optim::AdamConfig{.lr = config.lr});
  Rng rng(config.seed);
  std::vector<std::size_t> order = problem.train;

  TrainResult result;
  result.best_val_ap = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best = problem.params->snapshot();
  std::size_t since_best = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t idx : order) {
      const Tensor z = problem.logits(idx);
      const Tensor loss = reweighted_loss(z, problem.labels->row(idx), problem.taxonomy->ratios,
                                          problem.taxonomy->active, config.loss_form);
      const double v = loss.item();
      if (!std::isfinite(v)) {
        throw Error("NonFiniteLoss", "train: loss is " + io::format_double(v) + " at epoch " + std::to_string(epoch) +
                                         ", example " + std::to_string(idx));
      }
      total += v;
      optim::zero_grad(params);
      ad::backward(loss);
      optim::clip_grad_norm(params, config.max_norm);
      optim::adam_step(adam, params);
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = total / static_cast<double>(order.size());
    row.val_ap = validation_ap(problem, select_rows);
    row.lr = config.lr;
    if (config.record_wallclock) {
      row.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(row);
    result.epochs_run = epoch;

    // A tie moves the retained checkpoint forward (more training at equal
    // validation AP) but does not count as an improvement for patience.
    const bool improved = row.val_ap > result.best_val_ap;
    if (row.val_ap >= result.best_val_ap) {
      result.best_val_ap = row.val_ap;
      result.best_epoch = epoch;
      best = problem.params->snapshot();
    }
    if (improved) {
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  problem.params->restore(best);
  return result;
}

// ---- models -------------------------------------------------------------------

TagModel::TagModel(encoders::ModelConfig config, Tensor word_embeddings, std::size_t num_characters,
                   std::size_t num_tags, std::uint64_t seed) {
  Rng rng(seed);
  encoder_ = std::make_unique<encoders::HierarchicalModel>(std::move(config), std::move(word_embeddings),
                                                           num_characters, rng);
  head_ = nn::Linear::create(encoder_->params(), "head", encoder_->script_dim(), num_tags, rng);
}

Tensor TagModel::logits(const encoders::EncodedScript& script) const {
  return head_(encoder_->encode_script(script).embedding);
}

LoglineModel::LoglineModel(Tensor word_embeddings, std::size_t hidden_per_direction, std::size_t num_tags,
                           std::uint64_t seed)
    : words_(std::move(word_embeddings)) {
  Rng rng(seed);
  encoders::EncoderSpec spec;
  spec.kind = encoders::EncoderKind::GRU;
  spec.input_dim = words_.cols();
  spec.hidden_per_direction = hidden_per_direction;
  spec.attention_dim = 2 * hidden_per_direction;
  encoder_ = encoders::SequenceEncoder::create(store_, "logline", spec, rng);
  head_ = nn::Linear::create(store_, "head", encoder_.output_dim(), num_tags, rng);
}

Tensor LoglineModel::embed(const encoders::TokenIds& tokens) const {
  if (tokens.empty()) throw Error("EmptyStatement", "logline has no tokens");
  return encoder_.encode(ad::gather_rows(words_, tokens)).output;
}

Tensor LoglineModel::logits(const encoders::TokenIds& tokens) const { return head_(embed(tokens)); }

}  // namespace scriptenc::classifier

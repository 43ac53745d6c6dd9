#include "scriptenc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"

namespace scriptenc::evaluation {

double Counts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double Counts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

double Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Counts& Counts::operator+=(const Counts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

namespace {

void check_aligned(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold) {
  if (predicted.size() != gold.size()) {
    throw Error("ShapeMismatch", "evaluation: " + std::to_string(predicted.size()) + " predictions for " +
                                     std::to_string(gold.size()) + " gold scripts");
  }
}

bool similar(const AttributeSpace& space, const std::string& a, const std::string& b, double cutoff) {
  return a == b || space.percentile(a, b) > cutoff;
}

}  // namespace

Counts micro_counts(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold) {
  check_aligned(predicted, gold);
  Counts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (const auto& t : predicted[i]) (gold[i].contains(t) ? c.tp : c.fp) += 1;
    for (const auto& t : gold[i])
      if (!predicted[i].contains(t)) ++c.fn;
  }
  return c;
}

double micro_f1(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold) {
  return micro_counts(predicted, gold).f1();
}

// ---- tag spaces ----------------------------------------------------------------

AttributeSpace::AttributeSpace(std::vector<std::string> tags, std::vector<std::vector<double>> embeddings)
    : tags_(std::move(tags)) {
  const std::size_t n = tags_.size();
  if (embeddings.size() != n) throw Error("ShapeMismatch", "tag space: tag and embedding counts differ");
  for (std::size_t i = 0; i < n; ++i) {
    if (!index_.emplace(tags_[i], i).second) throw Error("DuplicateTag", "tag space: duplicate tag '" + tags_[i] + "'");
    if (embeddings[i].size() != embeddings.front().size()) {
      throw Error("ShapeMismatch", "tag space: '" + tags_[i] + "' has a different embedding dimension");
    }
  }
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = std::sqrt(std::inner_product(embeddings[i].begin(), embeddings[i].end(), embeddings[i].begin(), 0.0));
  }
  sim_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double denom = norms[i] * norms[j];
      const double dot = std::inner_product(embeddings[i].begin(), embeddings[i].end(), embeddings[j].begin(), 0.0);
      sim_[i * n + j] = i == j ? 1.0 : (denom > 0 ? dot / denom : 0.0);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sorted_.push_back(sim_[i * n + j]);
  std::sort(sorted_.begin(), sorted_.end());
}

std::size_t AttributeSpace::index(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) throw Error("UnknownTag", "tag '" + tag + "' has no embedding");
  return it->second;
}

double AttributeSpace::similarity(const std::string& a, const std::string& b) const {
  return sim_[index(a) * tags_.size() + index(b)];
}

double AttributeSpace::percentile(const std::string& a, const std::string& b) const {
  const std::size_t i = index(a), j = index(b);
  if (i == j || sorted_.empty()) return 100.0;
  const double s = sim_[i * tags_.size() + j];
  const auto at_most = std::upper_bound(sorted_.begin(), sorted_.end(), s) - sorted_.begin();
  return 100.0 * static_cast<double>(at_most) / static_cast<double>(sorted_.size());
}

TagEmbeddingSpace TagEmbeddingSpace::parse(std::string_view content) {
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::vector<double>>>> raw;
  std::size_t line_no = 0;
  for (const auto& line : io::split(content, '\n')) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    auto fields = io::split(line, '\t');
    if (fields.size() < 3) {
      throw Error("MalformedTagEmbeddings", "tag embeddings line " + std::to_string(line_no) +
                                                ": expected attribute, tag and values");
    }
    std::vector<double> vec;
    for (std::size_t f = 2; f < fields.size(); ++f) {
      for (const auto& tok : io::split(fields[f], ' ')) {
        if (io::trim(tok).empty()) continue;
        vec.push_back(io::parse_double(io::trim(tok)));
      }
    }
    auto& [tags, embs] = raw[std::string(io::trim(fields[0]))];
    tags.emplace_back(io::trim(fields[1]));
    embs.push_back(std::move(vec));
  }
  TagEmbeddingSpace space;
  for (auto& [attr, te] : raw) space.spaces_.emplace(attr, AttributeSpace(std::move(te.first), std::move(te.second)));
  return space;
}

TagEmbeddingSpace TagEmbeddingSpace::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

const AttributeSpace& TagEmbeddingSpace::attribute(const std::string& name) const {
  auto it = spaces_.find(name);
  if (it == spaces_.end()) throw Error("UnknownAttribute", "no tag embeddings for attribute '" + name + "'");
  return it->second;
}

std::vector<std::string> TagEmbeddingSpace::attributes() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : spaces_) out.push_back(k);
  return out;
}

double similarity_percentile(const std::string& a, const std::string& b, const AttributeSpace& space) {
  return space.percentile(a, b);
}

// ---- similarity matching ----------------------------------------------------------

Counts similarity_counts(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold,
                         const AttributeSpace& space, double cutoff) {
  check_aligned(predicted, gold);
  Counts total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    // (not identical, -similarity, pred, gold): identical pairs first, then most similar.
    std::vector<std::tuple<bool, double, const std::string*, const std::string*>> pairs;
    for (const auto& p : predicted[i]) {
      space.index(p);
      for (const auto& g : gold[i]) {
        if (similar(space, p, g, cutoff)) pairs.emplace_back(p != g, -space.similarity(p, g), &p, &g);
      }
    }
    for (const auto& g : gold[i]) space.index(g);
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      if (*std::get<2>(a) != *std::get<2>(b)) return *std::get<2>(a) < *std::get<2>(b);
      return *std::get<3>(a) < *std::get<3>(b);
    });
    std::set<const std::string*> used_pred, used_gold;
    std::size_t tp = 0;
    for (const auto& [diff, neg_sim, p, g] : pairs) {
      if (used_pred.contains(p) || used_gold.contains(g)) continue;
      used_pred.insert(p);
      used_gold.insert(g);
      ++tp;
    }
    total += Counts{tp, predicted[i].size() - tp, gold[i].size() - tp};
  }
  return total;
}

double similarity_f1(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold,
                     const AttributeSpace& space, double cutoff) {
  return similarity_counts(predicted, gold, space, cutoff).f1();
}

EquivalenceClasses merge_equivalents(const std::vector<std::string>& tags, const AttributeSpace& space,
                                     double cutoff) {
  std::vector<std::size_t> parent(tags.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    for (std::size_t j = i + 1; j < tags.size(); ++j) {
      if (similar(space, tags[i], tags[j], cutoff)) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  EquivalenceClasses out;
  std::map<std::size_t, std::size_t> root_to_class;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::size_t r = find(i);
    auto [it, fresh] = root_to_class.emplace(r, out.classes.size());
    if (fresh) out.classes.emplace_back();
    out.classes[it->second].push_back(tags[i]);
    out.class_of[tags[i]] = it->second;
  }
  return out;
}

// ---- taxonomy statistics ---------------------------------------------------------------

double tag_perplexity(const std::vector<double>& probabilities) {
  double total = 0, h = 0;
  for (double p : probabilities) {
    if (!std::isfinite(p) || p < 0) throw Error("InvalidDistribution", "perplexity: negative or non-finite probability");
    total += p;
    if (p > 0) h -= p * std::log2(p);
  }
  if (probabilities.empty() || std::abs(total - 1.0) > 1e-9) {
    throw Error("InvalidDistribution", "perplexity: probabilities sum to " + io::format_double(total));
  }
  return std::exp2(h);
}

std::vector<double> tag_distribution(const std::vector<double>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0) throw Error("InvalidDistribution", "tag distribution: no tag occurrences");
  std::vector<double> out;
  out.reserve(counts.size());
  for (double c : counts) out.push_back(c / total);
  return out;
}

std::vector<double> merged_counts(const std::vector<std::string>& tags, const std::vector<double>& counts,
                                  const EquivalenceClasses& classes) {
  if (tags.size() != counts.size()) throw Error("ShapeMismatch", "merged_counts: tags and counts differ");
  std::vector<double> out(classes.classes.size(), 0.0);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto it = classes.class_of.find(tags[i]);
    if (it == classes.class_of.end()) throw Error("UnknownTag", "tag '" + tags[i] + "' is in no class");
    out[it->second] += counts[i];
  }
  return out;
}

std::uint64_t pair_permutations(std::uint64_t n) {
  if (n < 2) throw Error("DomainError", "pair_permutations: n must be at least 2, got " + std::to_string(n));
  return n * (n - 1);
}

double cardinality_from_pairs(double p) { return (1.0 + std::sqrt(1.0 + 4.0 * p)) / 2.0; }

double effective_cardinality(const EquivalenceClasses& classes) {
  double n = 0, same = 0;
  for (const auto& c : classes.classes) {
    const double s = static_cast<double>(c.size());
    n += s;
    same += s * (s - 1);
  }
  return cardinality_from_pairs(n * (n - 1) - same);
}

std::vector<CutoffResult> cutoff_sweep(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold,
                                       const AttributeSpace& space, const std::vector<std::string>& tags,
                                       const std::vector<double>& tag_counts, const std::vector<double>& cutoffs) {
  const double base_perplexity = tag_perplexity(tag_distribution(tag_counts));
  std::vector<CutoffResult> out;
  for (double cutoff : cutoffs) {
    if (!(cutoff >= 0.0 && cutoff <= 100.0)) {
      throw Error("InvalidCutoff", "cutoff must lie in [0, 100], got " + io::format_double(cutoff));
    }
    const auto classes = merge_equivalents(tags, space, cutoff);
    CutoffResult r;
    r.cutoff = cutoff;
    r.f1 = similarity_f1(predicted, gold, space, cutoff);
    r.perplexity_reduction =
        1.0 - tag_perplexity(tag_distribution(merged_counts(tags, tag_counts, classes))) / base_perplexity;
    r.cardinality_reduction = 1.0 - effective_cardinality(classes) / static_cast<double>(tags.size());
    out.push_back(r);
  }
  return out;
}

nlohmann::json sweep_report(const std::string& attribute, const std::vector<CutoffResult>& rows) {
  nlohmann::json per_cutoff = nlohmann::json::object();
  for (const auto& r : rows) {
    per_cutoff[io::format_double(r.cutoff)] = {{"f1", r.f1},
                                               {"perplexity_reduction", r.perplexity_reduction},
                                               {"cardinality_reduction", r.cardinality_reduction}};
  }
  return {{attribute, per_cutoff}};
}

}  // namespace scriptenc::evaluation

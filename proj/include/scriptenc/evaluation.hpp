#pragma once

// Micro F-1, similarity-thresholded F-1 over a tag embedding space, and the
// taxonomy statistics used to describe what similarity matching buys:
// equivalence classes, tag perplexity and effective cardinality.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace scriptenc::evaluation {

using TagSet = std::set<std::string>;

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  double precision() const;
  double recall() const;
  double f1() const;  // 0 when precision + recall == 0
  Counts& operator+=(const Counts& o);
};

// Pools TP/FP/FN over every (script, tag) decision. Sizes must agree.
Counts micro_counts(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold);
double micro_f1(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold);

// Tag embeddings for one attribute plus the distribution of pairwise
// cosine similarities over unordered distinct pairs.
class AttributeSpace {
 public:
  AttributeSpace() = default;
  AttributeSpace(std::vector<std::string> tags, std::vector<std::vector<double>> embeddings);

  const std::vector<std::string>& tags() const { return tags_; }
  std::size_t index(const std::string& tag) const;  // UnknownTag
  bool contains(const std::string& tag) const { return index_.contains(tag); }
  double similarity(const std::string& a, const std::string& b) const;
  double distance(const std::string& a, const std::string& b) const { return 1.0 - similarity(a, b); }
  // Share (in percent) of distinct pairs whose similarity is <= this pair's.
  // A tag paired with itself is at 100.
  double percentile(const std::string& a, const std::string& b) const;

 private:
  std::vector<std::string> tags_;
  std::map<std::string, std::size_t> index_;
  std::vector<double> sim_;     // n x n cosine similarities
  std::vector<double> sorted_;  // similarities of i < j pairs, ascending
};

class TagEmbeddingSpace {
 public:
  // Lines "attribute<TAB>tag<TAB>v1 v2 ... vd" (values may also be tab separated).
  static TagEmbeddingSpace parse(std::string_view content);
  static TagEmbeddingSpace load(const std::filesystem::path& path);

  const AttributeSpace& attribute(const std::string& name) const;  // UnknownAttribute
  bool has(const std::string& name) const { return spaces_.contains(name); }
  std::vector<std::string> attributes() const;

 private:
  std::map<std::string, AttributeSpace> spaces_;
};

double similarity_percentile(const std::string& a, const std::string& b, const AttributeSpace& space);

// A prediction and a gold tag are similar when they are the same tag or the
// pair's percentile is strictly above the cutoff, so cutoff 100 is exact
// matching. Similar pairs are matched one-to-one per script, greedily in
// order of decreasing similarity (identical tags first).
Counts similarity_counts(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold,
                         const AttributeSpace& space, double cutoff);
double similarity_f1(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold,
                     const AttributeSpace& space, double cutoff);

struct EquivalenceClasses {
  std::vector<std::vector<std::string>> classes;  // ordered by first member's position in the tag list
  std::map<std::string, std::size_t> class_of;
};

// Union-find over every pair above the cutoff (same similarity rule).
EquivalenceClasses merge_equivalents(const std::vector<std::string>& tags, const AttributeSpace& space,
                                     double cutoff);

// 2^H with H in bits; InvalidDistribution unless entries are >= 0 and sum to 1 +- 1e-9.
double tag_perplexity(const std::vector<double>& probabilities);
std::vector<double> tag_distribution(const std::vector<double>& counts);
// Sums the counts of each class's members.
std::vector<double> merged_counts(const std::vector<std::string>& tags, const std::vector<double>& counts,
                                  const EquivalenceClasses& classes);

// n!/(n-2)! = n(n-1); DomainError for n < 2.
std::uint64_t pair_permutations(std::uint64_t n);
// Positive root of n^2 - n - p = 0.
double cardinality_from_pairs(double p);
// Ordered pairs of tags that are not equivalent, mapped back to a tag count.
double effective_cardinality(const EquivalenceClasses& classes);

struct CutoffResult {
  double cutoff = 100.0;
  double f1 = 0.0;
  double perplexity_reduction = 0.0;   // 1 - perplexity(merged) / perplexity(original)
  double cardinality_reduction = 0.0;  // 1 - effective_cardinality / n
};

std::vector<CutoffResult> cutoff_sweep(const std::vector<TagSet>& predicted, const std::vector<TagSet>& gold,
                                       const AttributeSpace& space, const std::vector<std::string>& tags,
                                       const std::vector<double>& tag_counts, const std::vector<double>& cutoffs);

// {attribute: {"<cutoff>": {f1, perplexity_reduction, cardinality_reduction}}}
nlohmann::json sweep_report(const std::string& attribute, const std::vector<CutoffResult>& rows);

}  // namespace scriptenc::evaluation

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scriptenc/autodiff.hpp"

namespace scriptenc::text {

// Lowercased runs of letters, digits, apostrophes and underscores.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  // Keeps tokens whose corpus count is >= min_count, in lexicographic order
  // after the UNK entry.
  static Vocabulary build(const std::map<std::string, std::size_t>& counts, std::size_t min_count = 5);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::size_t> encode(std::string_view text) const;
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Pretrained word vectors in the GloVe text layout: token then dim numbers.
class EmbeddingTable {
 public:
  static EmbeddingTable load(const std::filesystem::path& path, std::size_t expected_dim = 100);
  static EmbeddingTable parse(std::string_view content, std::size_t expected_dim = 100);
  void add(std::string token, std::vector<double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  const std::vector<double>* find(std::string_view token) const;
  std::string write() const;

  // [vocab.size() x dim] constant matrix aligned to vocabulary ids; UNK and
  // tokens without a pretrained vector get zero rows.
  ad::Tensor matrix_for(const Vocabulary& vocab) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

}  // namespace scriptenc::text

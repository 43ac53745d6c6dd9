#include "scriptenc/text.hpp"

#include <cctype>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"

namespace scriptenc::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    // strip quote-like apostrophes at the edges
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'' || c == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::build(const std::map<std::string, std::size_t>& counts, std::size_t min_count) {
  std::vector<std::string> tokens;
  for (const auto& [tok, n] : counts)
    if (n >= min_count && tok != kUnkToken) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_.push_back(kUnkToken);
  v.index_[kUnkToken] = kUnk;
  for (auto& t : tokens) {
    if (v.index_.count(t)) continue;
    v.index_[t] = v.tokens_.size();
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::hash() const {
  std::string joined;
  for (const auto& t : tokens_) {
    joined += t;
    joined += '\n';
  }
  return io::hex64(io::fnv1a64(joined));
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::size_t expected_dim) {
  return parse(io::read_file(path), expected_dim);
}

EmbeddingTable EmbeddingTable::parse(std::string_view content, std::size_t expected_dim) {
  EmbeddingTable table;
  table.dim_ = expected_dim;
  std::size_t line_no = 0;
  for (const auto& raw : io::split(content, '\n')) {
    ++line_no;
    auto line = io::trim(raw);
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    if (fields.size() - 1 != expected_dim) {
      throw Error("EmbeddingDimMismatch", "embedding line " + std::to_string(line_no) + " has " +
                                              std::to_string(fields.size() - 1) + " values, expected " +
                                              std::to_string(expected_dim));
    }
    std::vector<double> vec;
    vec.reserve(expected_dim);
    for (std::size_t k = 1; k < fields.size(); ++k) vec.push_back(io::parse_double(fields[k]));
    table.add(std::string(fields[0]), std::move(vec));
  }
  return table;
}

void EmbeddingTable::add(std::string token, std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw Error("EmbeddingDimMismatch", "vector for '" + token + "' has " + std::to_string(vec.size()) +
                                            " values, expected " + std::to_string(dim_));
  }
  if (!vectors_.count(token)) order_.push_back(token);
  vectors_[std::move(token)] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::string EmbeddingTable::write() const {
  std::string out;
  for (const auto& tok : order_) {
    out += tok;
    for (double v : vectors_.at(tok)) {
      out += ' ';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

ad::Tensor EmbeddingTable::matrix_for(const Vocabulary& vocab) const {
  std::vector<double> values(vocab.size() * dim_, 0.0);
  for (std::size_t id = 1; id < vocab.size(); ++id) {
    if (const auto* v = find(vocab.token(id))) std::copy(v->begin(), v->end(), values.begin() + static_cast<std::ptrdiff_t>(id * dim_));
  }
  return ad::Tensor::constant({vocab.size(), dim_}, std::move(values));
}

}  // namespace scriptenc::text

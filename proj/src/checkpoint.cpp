#include "scriptenc/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"

namespace scriptenc::checkpoint {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'E', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("CorruptCheckpoint", "checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode(const std::vector<Entry>& entries) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put<std::uint64_t>(out, d);
    for (double v : e.values) put<double>(out, v);
  }
  return out;
}

std::vector<Entry> decode(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw Error("CorruptCheckpoint", "bad checkpoint magic");
  }
  if (auto v = r.get<std::uint32_t>(); v != kVersion) {
    throw Error("CorruptCheckpoint", "unsupported checkpoint version " + std::to_string(v));
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    const auto n = ad::shape_size(e.shape);
    e.values.resize(n);
    for (auto& v : e.values) v = r.get<double>();
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw Error("CorruptCheckpoint", "trailing bytes after checkpoint entries");
  return entries;
}

std::vector<Entry> entries_of(const nn::ParameterStore& store) {
  std::vector<Entry> out;
  for (const auto& p : store.named()) {
    out.push_back({p.name, p.tensor.shape(), {p.tensor.value().begin(), p.tensor.value().end()}});
  }
  return out;
}

void save(const std::filesystem::path& path, const nn::ParameterStore& store) {
  io::write_file_atomic(path, encode(entries_of(store)));
}

std::vector<Entry> load(const std::filesystem::path& path) { return decode(io::read_file(path)); }

void apply(const std::vector<Entry>& entries, nn::ParameterStore& store) {
  const auto& named = store.named();
  if (entries.size() != named.size()) {
    throw Error("CheckpointMismatch", "checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                                          std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != named[i].name || entries[i].shape != named[i].tensor.shape()) {
      throw Error("CheckpointMismatch", "checkpoint tensor '" + entries[i].name + "' " + ad::shape_string(entries[i].shape) +
                                            " does not match '" + named[i].name + "' " +
                                            ad::shape_string(named[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto dst = named[i].tensor;
    std::copy(entries[i].values.begin(), entries[i].values.end(), dst.mutable_value().begin());
  }
}

}  // namespace scriptenc::checkpoint

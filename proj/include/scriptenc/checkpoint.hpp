#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "scriptenc/autodiff.hpp"
#include "scriptenc/nn.hpp"

namespace scriptenc::checkpoint {

// Binary parameter container, all integers and doubles little-endian:
//
//   "SCENCKPT"            8 bytes magic
//   u32 version (=1)
//   u32 entry count
//   per entry:
//     u32 name length, name bytes (UTF-8)
//     u32 rank, u64 dim[rank]
//     f64 value[prod(dim)]
//
// A JSON manifest (model config, vocabulary hash, seed) travels next to it.
struct Entry {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

std::string encode(const std::vector<Entry>& entries);
std::vector<Entry> decode(const std::string& bytes);

std::vector<Entry> entries_of(const nn::ParameterStore& store);

void save(const std::filesystem::path& path, const nn::ParameterStore& store);
std::vector<Entry> load(const std::filesystem::path& path);

// Copies values into an identically laid out store; names and shapes must match.
void apply(const std::vector<Entry>& entries, nn::ParameterStore& store);

}  // namespace scriptenc::checkpoint

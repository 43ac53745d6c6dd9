#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scriptenc::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace scriptenc::io

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the file readers and writers.
namespace vsa::text {

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

std::string_view trim(std::string_view s);

std::vector<std::string_view> split_whitespace(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char delimiter);

/// Strict numeric parsing: the whole token must be consumed. Throws vsa::ParseError.
double parse_double(std::string_view token, std::size_t line = 0);
long long parse_int(std::string_view token, std::size_t line = 0);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// FNV-1a, used for config digests and state checksums.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ull);

std::string hex64(std::uint64_t value);

}  // namespace vsa::text

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vfm {

/// Shortest round-trip decimal representation; locale independent.
std::string format_double(double x);

/// Fixed number of significant digits, for human-facing tables.
std::string format_sig(double x, int digits);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string trim(std::string_view s);
std::vector<std::string> split_csv_line(std::string_view line);

/// Flat `key=value` configuration with `#` comments.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_key_values(std::string_view text);
KeyValueMap read_key_value_file(const std::string& path);
std::string to_key_value_text(const KeyValueMap& kv);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace vfm

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sct::text {

// Shortest representation that parses back to the identical value.
std::string format_double(double value);
std::string format_float(float value);

double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::uint64_t parse_uint(std::string_view text);
bool parse_bool(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_whitespace(std::string_view text);

// `key = value` lines; blank lines and lines starting with '#' are skipped.
// Later duplicates overwrite earlier ones.
std::map<std::string, std::string> parse_key_values(std::string_view text);

} // namespace sct::text

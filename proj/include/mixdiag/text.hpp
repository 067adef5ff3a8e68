#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mixdiag::text {

/// Shortest decimal (no exponent) that parses back to the same double.
std::string format_double(double value);

/// Strict decimal parse of the whole string; throws ParseError(line) on failure.
double parse_double(std::string_view s, std::size_t line = 0);
std::int64_t parse_int(std::string_view s, std::size_t line = 0);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);
std::string hex16(std::uint64_t value);

}  // namespace mixdiag::text

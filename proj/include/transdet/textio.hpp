#pragma once

// Text helpers for the line-oriented file formats. Doubles are written in
// shortest round-trip form so that write -> read reproduces every bit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace transdet::textio {

std::string format_double(double v);
void append_doubles(std::string& out, std::span<const double> values, char sep = ' ');

/// Strict parses; throw std::invalid_argument on any trailing garbage.
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

/// Splits on `sep`, skipping empty fields when `skip_empty`.
std::vector<std::string_view> split(std::string_view s, char sep, bool skip_empty = true);
std::string_view trim(std::string_view s);

/// 64-bit FNV-1a; stable across platforms, used for config digests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// One `key = value` entry of a config file, with its 1-based line number.
struct KeyValueLine {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses `key = value` lines; `#` starts a comment and blank lines are
/// skipped. Throws MalformedDataError with the line number for a line without
/// `=` or with an empty key.
std::vector<KeyValueLine> parse_key_values(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace transdet::textio

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small helpers shared by the line-oriented file formats.
namespace memlabel::text {

std::string_view trim(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);

/// Strict decimal parse: the whole field must be consumed and finite.
std::optional<double> parse_double(std::string_view s);

std::optional<std::int64_t> parse_int(std::string_view s);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

std::string join_doubles(const std::vector<double>& values, char sep = ',');

/// Reads every line of a file; throws memlabel::Error if it cannot be opened.
std::vector<std::string> read_lines(const std::string& path);

/// Writes through a temporary sibling and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace memlabel::text

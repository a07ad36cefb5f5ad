#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nmtprobe {

/// Writes to a sibling temp file, then renames over `path`, so readers never
/// observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Lines without terminators; a trailing '\r' is stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Splits on runs of spaces/tabs.
std::vector<std::string> split_whitespace(std::string_view line);

std::vector<std::string> split(std::string_view text, char sep);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string trim(std::string_view s);

/// Fixed-precision decimal, stable across runs ("%.{digits}f").
std::string format_fixed(double value, int digits);

/// Round-trip decimal ("%.17g").
std::string format_exact(double value);

/// 16 lowercase hex digits; the form of every content id.
std::string hex_id(std::uint64_t value);

}  // namespace nmtprobe

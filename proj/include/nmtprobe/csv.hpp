#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nmtprobe {

/// Quotes a field when it holds a comma, quote or newline (RFC 4180).
std::string csv_escape(std::string_view field);

std::string csv_row(const std::vector<std::string>& fields);

/// Parses one CSV record (no embedded newlines).
std::vector<std::string> csv_parse_line(std::string_view line);

/// Parses a whole CSV text into records, skipping empty lines.
std::vector<std::vector<std::string>> csv_parse(std::string_view text);

}  // namespace nmtprobe

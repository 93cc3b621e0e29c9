#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mergemine {

// Timestamps are UTC epoch seconds throughout; the canonical text form is
// ISO-8601 "YYYY-MM-DDTHH:MM:SSZ".
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t epoch_seconds);

std::string_view trim(std::string_view value);
std::string to_lower(std::string_view value);
bool iequals(std::string_view a, std::string_view b);

// Splits on '\n'. A trailing newline does not produce an empty final line.
// '\r' bytes are preserved as content.
std::vector<std::string> split_lines(std::string_view bytes);

bool is_hex40(std::string_view value);

// Replaces invalid UTF-8 sequences with U+FFFD. Used only when text leaves
// the pipeline (CSV cells); identity-bearing values (hashes) are computed
// over raw bytes.
std::string utf8_sanitize(std::string_view bytes);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view bytes);

}  // namespace mergemine

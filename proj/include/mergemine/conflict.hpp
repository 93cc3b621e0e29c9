#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mergemine {

enum class conflict_type { both_modified, deleted_by_us, deleted_by_them, added_by_both, binary };

std::string to_string(conflict_type type);
conflict_type conflict_type_from_string(std::string_view text);

// One marker-delimited hunk. Line numbers are 1-based positions of the
// "<<<<<<<", "=======", ">>>>>>>" lines themselves.
struct conflict_region {
    std::string pr_key;
    std::string file_path;
    int region_index = 0;
    std::int64_t start_line = 0;
    std::int64_t mid_line = 0;
    std::int64_t end_line = 0;
    std::int64_t ours_len = 0;
    std::int64_t theirs_len = 0;
    std::string ours_hash;    // 64-hex SHA-256 of the side's content
    std::string theirs_hash;
    std::vector<std::string> ours_preview;
    std::vector<std::string> theirs_preview;
};

struct conflict_file_record {
    std::string pr_key;
    std::string file_path;
    std::int64_t num_regions = 0;
    std::int64_t conflict_lines = 0;  // sum of both side lengths over the file's regions
    std::string file_extension;       // lowercased, "" when none
    conflict_type type = conflict_type::both_modified;
};

struct severity_metrics {
    std::int64_t num_conflict_files = 0;
    std::int64_t num_conflict_regions = 0;
    std::int64_t conflict_lines = 0;

    bool operator==(const severity_metrics&) const = default;
};

enum class parse_error_code { unterminated_region, separator_missing };

class conflict_parse_error : public std::runtime_error {
  public:
    conflict_parse_error(parse_error_code code, std::int64_t line, const std::string& what)
        : std::runtime_error(what), code_(code), line_(line) {}
    parse_error_code code() const { return code_; }
    std::int64_t line() const { return line_; }

  private:
    parse_error_code code_;
    std::int64_t line_;
};

inline constexpr int default_preview_lines = 5;

// Parses standard three-token conflict markers into regions. A line opens
// a region iff it begins at column 0 with exactly seven '<' followed by a
// space or end of line; separators and closers follow the same rule with
// '=' and '>'. Lines outside regions are ignored. Marker-like content
// inside an open region does not nest. Throws conflict_parse_error on an
// unterminated region or a closer seen before the separator. diff3 base
// sections ("|||||||") are folded into the ours span; a note is appended
// when that happens.
std::vector<conflict_region> parse_conflict_regions(std::span<const std::string> lines,
                                                    const std::string& pr_key = {},
                                                    const std::string& file_path = {},
                                                    int preview_lines = default_preview_lines,
                                                    std::vector<std::string>* notes = nullptr);

// SHA-256 over the side's lines joined by "\n", no trailing newline.
std::string hash_side(std::span<const std::string> lines);

// First min(n, |lines|) lines, verbatim.
std::vector<std::string> preview_side(std::span<const std::string> lines,
                                      int n = default_preview_lines);

// Sums per-file records into PR-level metrics. All records must share one
// pr_key; mixed keys throw std::invalid_argument.
severity_metrics compute_severity(std::span<const conflict_file_record> files);

// NUL byte within the first 8000 bytes.
bool looks_binary(std::string_view bytes);

// Substring after the final '.' of the final path segment, lowercased.
std::string file_extension_of(const std::string& path);

// --- batch scanning kernels ---------------------------------------------
// The pipeline hands every unmerged file of a PR to one of these; the
// parallel version is the production path and the serial one is the
// reference it is tested against.

struct file_scan_input {
    std::string path;
    conflict_type type = conflict_type::both_modified;
    std::string bytes;  // worktree content; empty for deleted sides
};

struct file_scan_output {
    conflict_file_record record;
    std::vector<conflict_region> regions;
    std::vector<std::string> notes;
};

file_scan_output scan_one_file(const std::string& pr_key, const file_scan_input& input,
                               int preview_lines);

std::vector<file_scan_output> scan_files_serial(const std::string& pr_key,
                                                std::span<const file_scan_input> inputs,
                                                int preview_lines = default_preview_lines);

std::vector<file_scan_output> scan_files_parallel(const std::string& pr_key,
                                                  std::span<const file_scan_input> inputs,
                                                  int preview_lines = default_preview_lines);

}  // namespace mergemine

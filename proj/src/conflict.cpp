#include "mergemine/conflict.hpp"

#include "mergemine/sha256.hpp"
#include "mergemine/text_util.hpp"

#include <algorithm>

namespace mergemine {

namespace {

// Column-0 marker test: exactly seven marker characters, then space or
// end of line. A trailing '\r' counts as end so CRLF content parses the
// same way. An eighth marker character disqualifies the line.
bool is_marker(const std::string& line, char marker) {
    if (line.size() < 7) {
        return false;
    }
    for (int i = 0; i < 7; ++i) {
        if (line[static_cast<std::size_t>(i)] != marker) {
            return false;
        }
    }
    if (line.size() == 7) {
        return true;
    }
    char next = line[7];
    return next == ' ' || (next == '\r' && line.size() == 8);
}

std::string join_lines(std::span<const std::string> lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) {
            out.push_back('\n');
        }
        out += lines[i];
    }
    return out;
}

}  // namespace

std::string to_string(conflict_type type) {
    switch (type) {
        case conflict_type::both_modified: return "both_modified";
        case conflict_type::deleted_by_us: return "deleted_by_us";
        case conflict_type::deleted_by_them: return "deleted_by_them";
        case conflict_type::added_by_both: return "added_by_both";
        case conflict_type::binary: return "binary";
    }
    return "both_modified";
}

conflict_type conflict_type_from_string(std::string_view text) {
    if (text == "deleted_by_us") return conflict_type::deleted_by_us;
    if (text == "deleted_by_them") return conflict_type::deleted_by_them;
    if (text == "added_by_both") return conflict_type::added_by_both;
    if (text == "binary") return conflict_type::binary;
    return conflict_type::both_modified;
}

std::vector<conflict_region> parse_conflict_regions(std::span<const std::string> lines,
                                                    const std::string& pr_key,
                                                    const std::string& file_path,
                                                    int preview_lines,
                                                    std::vector<std::string>* notes) {
    enum class state { outside, ours_side, theirs_side };

    std::vector<conflict_region> regions;
    state st = state::outside;
    std::int64_t start = 0;
    std::int64_t mid = 0;
    bool in_base_section = false;  // diff3 fold
    std::vector<std::string> ours;
    std::vector<std::string> theirs;

    for (std::size_t idx = 0; idx < lines.size(); ++idx) {
        const auto& line = lines[idx];
        std::int64_t lineno = static_cast<std::int64_t>(idx) + 1;
        switch (st) {
            case state::outside:
                if (is_marker(line, '<')) {
                    st = state::ours_side;
                    start = lineno;
                    in_base_section = false;
                    ours.clear();
                    theirs.clear();
                }
                break;
            case state::ours_side:
                if (is_marker(line, '=')) {
                    st = state::theirs_side;
                    mid = lineno;
                } else if (is_marker(line, '>')) {
                    throw conflict_parse_error(parse_error_code::separator_missing, lineno,
                                               "closing marker before separator at line " +
                                                   std::to_string(lineno));
                } else if (is_marker(line, '|')) {
                    in_base_section = true;
                    if (notes) {
                        notes->push_back("diff3 base section folded at line " +
                                         std::to_string(lineno));
                    }
                } else if (!in_base_section) {
                    ours.push_back(line);
                }
                break;
            case state::theirs_side:
                if (is_marker(line, '>')) {
                    conflict_region region;
                    region.pr_key = pr_key;
                    region.file_path = file_path;
                    region.region_index = static_cast<int>(regions.size());
                    region.start_line = start;
                    region.mid_line = mid;
                    region.end_line = lineno;
                    region.ours_len = mid - start - 1;
                    region.theirs_len = lineno - mid - 1;
                    region.ours_hash = hash_side(ours);
                    region.theirs_hash = hash_side(theirs);
                    region.ours_preview = preview_side(ours, preview_lines);
                    region.theirs_preview = preview_side(theirs, preview_lines);
                    regions.push_back(std::move(region));
                    st = state::outside;
                } else {
                    theirs.push_back(line);
                }
                break;
        }
    }
    if (st != state::outside) {
        throw conflict_parse_error(parse_error_code::unterminated_region,
                                   static_cast<std::int64_t>(lines.size()),
                                   "unterminated conflict region opened at line " +
                                       std::to_string(start));
    }
    return regions;
}

std::string hash_side(std::span<const std::string> lines) {
    return sha256_hex(join_lines(lines));
}

std::vector<std::string> preview_side(std::span<const std::string> lines, int n) {
    auto count = std::min<std::size_t>(lines.size(), static_cast<std::size_t>(std::max(n, 0)));
    return {lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(count)};
}

severity_metrics compute_severity(std::span<const conflict_file_record> files) {
    severity_metrics metrics;
    for (const auto& file : files) {
        if (file.pr_key != files.front().pr_key) {
            throw std::invalid_argument("compute_severity: mixed pr_keys (" +
                                        files.front().pr_key + " vs " + file.pr_key + ")");
        }
        metrics.num_conflict_files += 1;
        metrics.num_conflict_regions += file.num_regions;
        metrics.conflict_lines += file.conflict_lines;
    }
    return metrics;
}

bool looks_binary(std::string_view bytes) {
    auto probe = bytes.substr(0, std::min<std::size_t>(bytes.size(), 8000));
    return probe.find('\0') != std::string_view::npos;
}

std::string file_extension_of(const std::string& path) {
    auto slash = path.find_last_of('/');
    std::string segment = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = segment.find_last_of('.');
    if (dot == std::string::npos || dot + 1 == segment.size()) {
        return {};
    }
    return to_lower(segment.substr(dot + 1));
}

file_scan_output scan_one_file(const std::string& pr_key, const file_scan_input& input,
                               int preview_lines) {
    file_scan_output out;
    out.record.pr_key = pr_key;
    out.record.file_path = input.path;
    out.record.file_extension = file_extension_of(input.path);
    out.record.type = input.type;

    bool has_markers = input.type == conflict_type::both_modified ||
                       input.type == conflict_type::added_by_both;
    if (has_markers && looks_binary(input.bytes)) {
        out.record.type = conflict_type::binary;
        return out;
    }
    if (!has_markers) {
        // modify/delete and friends: the worktree holds the surviving side
        // with no markers. The file still counts, with zero regions.
        return out;
    }

    auto lines = split_lines(input.bytes);
    try {
        out.regions = parse_conflict_regions(lines, pr_key, input.path, preview_lines, &out.notes);
    } catch (const conflict_parse_error& e) {
        out.notes.push_back("parse error in " + input.path + ": " + e.what());
        out.regions.clear();
    }
    out.record.num_regions = static_cast<std::int64_t>(out.regions.size());
    for (const auto& region : out.regions) {
        out.record.conflict_lines += region.ours_len + region.theirs_len;
    }
    return out;
}

std::vector<file_scan_output> scan_files_serial(const std::string& pr_key,
                                                std::span<const file_scan_input> inputs,
                                                int preview_lines) {
    std::vector<file_scan_output> outputs;
    outputs.reserve(inputs.size());
    for (const auto& input : inputs) {
        outputs.push_back(scan_one_file(pr_key, input, preview_lines));
    }
    return outputs;
}

}  // namespace mergemine

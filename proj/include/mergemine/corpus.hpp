#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mergemine {

enum class pr_state { open, closed, merged, unknown };

std::string to_string(pr_state state);
pr_state pr_state_from_string(std::string_view text);

// One input pull request from the corpus export.
struct pull_request_record {
    std::string repo_full_name;  // "owner/repository"
    std::int64_t pr_number = 0;
    std::string pr_key;  // repo_full_name + "#" + pr_number
    std::string agent;
    pr_state state = pr_state::unknown;
    std::optional<std::int64_t> created_at;
    std::optional<std::int64_t> closed_at;
    std::optional<std::int64_t> merged_at;
    std::int64_t additions = 0;
    std::int64_t deletions = 0;
    bool churn_known = false;     // additions/deletions were present in the input
    bool inconsistent = false;    // state vs timestamp combination did not add up
};

enum class corpus_format { csv, jsonl };

struct corpus_issue {
    std::size_t row = 0;  // 1-based, header excluded for CSV
    std::string reason;
};

struct corpus_load_result {
    std::vector<pull_request_record> records;
    std::vector<corpus_issue> issues;  // bad rows and dropped duplicates
};

// Throws std::runtime_error when the file is unreadable or the header
// lacks repo_full_name / pr_number. Bad rows land in issues, never
// silently dropped. Duplicate pr_keys keep the first occurrence.
corpus_load_result load_corpus(const std::filesystem::path& path, corpus_format format);

// Throws std::invalid_argument on a malformed repo name (not exactly one
// '/', empty segment, contains '#') or pr_number < 1.
std::string make_pr_key(const std::string& repo_full_name, std::int64_t pr_number);

// Splits a valid pr_key at its final '#'.
std::pair<std::string, std::int64_t> split_pr_key(const std::string& pr_key);

struct candidate_record {
    pull_request_record record;
    bool deferred = false;  // state unknown; final decision happens after metadata
};

struct excluded_record {
    pull_request_record record;
    std::string reason;
};

struct filter_result {
    std::vector<candidate_record> retained;
    std::vector<excluded_record> excluded;
};

// Keeps open PRs and closed-without-merge PRs; defers unknown states;
// excludes merged ones. Total: |retained| + |excluded| == |records|.
filter_result filter_candidates(std::span<const pull_request_record> records);

}  // namespace mergemine

#pragma once

#include "mergemine/conflict.hpp"
#include "mergemine/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace mergemine {

enum class merge_label { merge_clean, merge_conflict, merge_error };
std::string to_string(merge_label label);
std::optional<merge_label> merge_label_from_string(std::string_view text);

enum class merge_error_code { commit_unreachable, repo_unavailable, merge_tool_failure };
std::string to_string(merge_error_code code);

enum class mergeable_state { mergeable, conflicting, unknown };
std::string to_string(mergeable_state state);
mergeable_state mergeable_state_from_string(std::string_view text);

enum class base_provenance { api_oid, reconstructed, fallback };
std::string to_string(base_provenance provenance);

struct repository_record {
    std::string repo_full_name;
    std::int64_t stars = 0;
    std::int64_t forks = 0;
    std::optional<std::string> primary_language;
    bool is_archived = false;
    bool is_fork = false;
};

struct conflict_file_commit {
    std::string pr_key;
    std::string file_path;
    std::optional<std::string> head_last_touch_oid;
    std::optional<std::string> base_last_touch_oid;
};

// One row of pull_request.csv. `outcome` is set only for PRs that reached
// simulation; status_code always carries the terminal status.
struct pull_request_row {
    std::string pr_key;
    std::string repo_full_name;
    std::int64_t pr_number = 0;
    std::string agent;
    pr_state state = pr_state::unknown;
    std::optional<std::int64_t> created_at;
    std::optional<std::int64_t> closed_at;
    std::optional<std::int64_t> merged_at;
    std::string base_ref_oid;
    std::string head_ref_oid;
    std::string simulated_base_oid;
    mergeable_state mergeable = mergeable_state::unknown;
    std::optional<merge_label> outcome;
    severity_metrics metrics;
    std::optional<std::int64_t> additions;
    std::optional<std::int64_t> deletions;
    std::string status_code;
    // raw-variant columns
    base_provenance provenance = base_provenance::api_oid;
    int fetch_attempts = 0;
    std::optional<int> fetch_http_status;
};

enum class run_phase { fetch, prepare, simulate, extract };
std::string to_string(run_phase phase);

struct run_log_entry {
    std::string pr_key;
    run_phase phase = run_phase::fetch;
    std::string status_code;
    std::string message;
    std::int64_t timestamp = 0;
    int attempt = 0;
    bool terminal = false;
    std::vector<std::string> commands;  // verbatim tool invocations
};

// Append-only JSONL log, flushed per entry so interrupted runs can resume.
class run_log {
  public:
    run_log() = default;
    explicit run_log(const std::filesystem::path& path);

    void append(const run_log_entry& entry);
    bool is_open() const { return out_.is_open(); }

    static std::vector<run_log_entry> load(const std::filesystem::path& path);
    static std::unordered_set<std::string> terminal_keys(const std::filesystem::path& path);

  private:
    std::ofstream out_;
    std::mutex mutex_;
};

std::string run_log_entry_to_json(const run_log_entry& entry);

struct entity_streams {
    std::vector<repository_record> repositories;
    std::vector<pull_request_row> pull_requests;
    std::vector<conflict_file_record> conflict_files;
    std::vector<conflict_region> conflict_regions;
    std::vector<conflict_file_commit> conflict_file_commits;
};

enum class dataset_variant { raw, clean };
std::string to_string(dataset_variant variant);

class integrity_error : public std::runtime_error {
  public:
    integrity_error(std::string key, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

struct table_manifest_entry {
    std::string file;
    std::int64_t rows = 0;
    std::string sha256;
};

struct emit_manifest {
    dataset_variant variant = dataset_variant::clean;
    std::vector<table_manifest_entry> tables;
};

// Writes the five tables plus manifest.json into out_dir. Rows are sorted
// by primary key and columns follow the schema order, so re-emission of
// identical streams is byte-identical. Referential-integrity violations
// throw integrity_error naming the offending key.
emit_manifest emit_tables(const entity_streams& streams, const std::filesystem::path& out_dir,
                          dataset_variant variant);

// Reads pull_request.csv back into rows (either variant).
std::vector<pull_request_row> load_pull_request_table(const std::filesystem::path& csv_path);

}  // namespace mergemine

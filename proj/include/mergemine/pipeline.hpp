#pragma once

#include "mergemine/analytics.hpp"
#include "mergemine/corpus.hpp"
#include "mergemine/dataset.hpp"
#include "mergemine/github_client.hpp"
#include "mergemine/merge_sim.hpp"
#include "mergemine/repo_cache.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mergemine {

struct pipeline_config {
    std::filesystem::path corpus_path;
    corpus_format format = corpus_format::csv;
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path out_dir = "out";
    std::vector<std::string> tokens;
    std::string api_url = "https://api.github.com/graphql";
    std::string remote_base = "https://github.com/";
    int workers = 0;  // 0: logical processors, capped at 8
    retry_policy retry;
    int preview_lines = default_preview_lines;
    dataset_variant variant = dataset_variant::clean;
    bool resume = false;
    bool offline = false;
};

int default_worker_count();

// Everything one PR contributes to the dataset, persisted as one JSONL
// line so interrupted runs can resume and emission stays a pure function
// of the bundle file.
struct pr_bundle {
    pull_request_row row;
    std::vector<conflict_file_record> files;
    std::vector<conflict_region> regions;
    std::vector<conflict_file_commit> commits;
    std::optional<repository_record> repository;
};

std::string bundle_to_json_line(const pr_bundle& bundle);
std::optional<pr_bundle> bundle_from_json_line(const std::string& line);

// Builds emit-ready streams from bundles: first bundle per pr_key wins,
// repositories are deduplicated, and a default repository row is
// synthesized for repos that never got metadata.
entity_streams build_streams(const std::vector<pr_bundle>& bundles);

struct pipeline_summary {
    std::map<std::string, std::int64_t> terminal_counts;
    std::int64_t processed = 0;       // PRs reaching a terminal state in this run
    std::int64_t skipped_resume = 0;  // already terminal in the run log
    std::int64_t excluded_ingest = 0;
    bool emitted = false;

    bool ok() const { return emitted && (processed > 0 || skipped_resume > 0); }
};

// Stage files inside out_dir. Each stage reads its predecessor's output,
// so later stages replay offline.
inline constexpr const char* candidates_file = "candidates.jsonl";
inline constexpr const char* ingest_report_file = "ingest_report.json";
inline constexpr const char* metadata_file = "metadata.jsonl";
inline constexpr const char* bundles_file = "bundles.jsonl";
inline constexpr const char* run_log_file = "run_log.jsonl";

struct ingest_output {
    std::vector<candidate_record> candidates;
    std::int64_t excluded = 0;
    std::int64_t issues = 0;
};

ingest_output ingest_stage(const pipeline_config& config);
std::vector<candidate_record> load_candidates(const std::filesystem::path& out_dir);

using metadata_map = std::map<std::string, fetch_result>;

metadata_map fetch_stage(const pipeline_config& config,
                         const std::vector<candidate_record>& candidates,
                         std::shared_ptr<http_transport> transport, run_log& log);
metadata_map load_metadata(const std::filesystem::path& out_dir);

// Runs preparation, simulation, and extraction for every candidate and
// emits the five tables. Appends to bundles.jsonl and the run log as it
// goes; with resume=true, PRs whose terminal entry already exists are
// skipped.
pipeline_summary simulate_stage(const pipeline_config& config,
                                const std::vector<candidate_record>& candidates,
                                const metadata_map& metadata, run_log& log);

struct analyze_output {
    std::vector<agent_rate> rates;
    severity_summary_result severity;
    decile_result deciles;
};

// Reads pull_request.csv from out_dir and writes agent_rates.csv,
// severity_hist.csv, churn_deciles.csv next to it.
analyze_output analyze_stage(const std::filesystem::path& out_dir);

pipeline_summary run_pipeline(const pipeline_config& config,
                              std::shared_ptr<http_transport> transport = nullptr);

}  // namespace mergemine

#pragma once

#include "mergemine/conflict.hpp"
#include "mergemine/dataset.hpp"
#include "mergemine/github_client.hpp"
#include "mergemine/repo_cache.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mergemine {

struct merge_outcome {
    std::string pr_key;
    merge_label label = merge_label::merge_error;
    std::optional<merge_error_code> error;
    severity_metrics metrics;
    std::string simulated_base_oid;
    std::string head_oid;
    base_provenance provenance = base_provenance::api_oid;
};

struct simulation_result {
    merge_outcome outcome;
    std::vector<conflict_file_record> files;
    std::vector<conflict_region> regions;
    std::vector<std::string> notes;
};

struct resolved_base {
    std::string oid;
    base_provenance provenance = base_provenance::api_oid;
};

class not_in_merge_state : public std::runtime_error {
  public:
    not_in_merge_state() : std::runtime_error("repository is not in a conflicted merge state") {}
};

// Open PRs use the API base OID verbatim. Closed PRs reconstruct the base
// branch tip at closure time: the newest commit on origin/<base_ref_name>
// whose committer timestamp is <= closed_at. When reconstruction finds
// nothing usable the API OID is the fallback and the provenance records
// that. Throws repo_cache_error{commit_unreachable} when no candidate
// resolves.
resolved_base resolve_merge_base(const pr_metadata& meta, repo_cache& cache,
                                 const repo_handle& handle);

// Runs the non-committing, non-fast-forward merge of head into base on a
// temporary analysis branch, extracts conflict regions on failure, and
// restores the repository to its pre-call state on every path. The
// worktree must already be prepared at base_oid.
simulation_result simulate_merge(repo_cache& cache, const repo_handle& handle,
                                 const std::string& base_oid, const std::string& head_oid,
                                 const std::string& pr_key,
                                 int preview_lines = default_preview_lines);

// One entry per unmerged path, with the conflict type derived from the
// index stages. Throws not_in_merge_state when no merge is in progress.
std::vector<std::pair<std::string, conflict_type>> list_conflicted_files(
    repo_cache& cache, const repo_handle& handle);

// Aborts any in-progress merge, drops the analysis branch, detaches HEAD
// at its current commit, and scrubs the worktree. Safe to call twice.
void revert_merge_state(repo_cache& cache, const repo_handle& handle);

}  // namespace mergemine

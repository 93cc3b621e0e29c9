#include "mergemine/merge_sim.hpp"

#include "mergemine/text_util.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

namespace mergemine {

namespace {

constexpr const char* analysis_branch = "sim-analysis";

bool merge_in_progress(repo_cache& cache, const repo_handle& handle) {
    return cache.git(handle, {"rev-parse", "--verify", "-q", "MERGE_HEAD"}).ok();
}

std::string current_commit(repo_cache& cache, const repo_handle& handle) {
    auto result = cache.git(handle, {"rev-parse", "HEAD"});
    return std::string(trim(result.out));
}

conflict_type type_from_stages(const std::set<int>& stages) {
    if (stages.count(1) && stages.count(2) && stages.count(3)) {
        return conflict_type::both_modified;
    }
    if (!stages.count(1)) {
        return conflict_type::added_by_both;
    }
    if (!stages.count(3)) {
        return conflict_type::deleted_by_them;
    }
    return conflict_type::deleted_by_us;
}

}  // namespace

resolved_base resolve_merge_base(const pr_metadata& meta, repo_cache& cache,
                                 const repo_handle& handle) {
    auto fallback = [&]() -> resolved_base {
        if (!cache.resolve_commit(handle, meta.base_ref_oid)) {
            throw repo_cache_error(repo_error_code::commit_unreachable,
                                   "base commit unreachable for " + meta.pr_key);
        }
        return {meta.base_ref_oid, base_provenance::fallback};
    };

    if (meta.state == pr_state::open) {
        if (!cache.resolve_commit(handle, meta.base_ref_oid)) {
            throw repo_cache_error(repo_error_code::commit_unreachable,
                                   "base commit unreachable for " + meta.pr_key);
        }
        return {meta.base_ref_oid, base_provenance::api_oid};
    }

    if (!meta.closed_at) {
        return fallback();
    }

    // Newest commit on the base branch with committer timestamp <= closed_at.
    auto log = cache.git(handle, {"log", "--format=%H %ct",
                                  "refs/remotes/origin/" + meta.base_ref_name});
    if (!log.ok()) {
        return fallback();
    }
    std::string best_oid;
    std::int64_t best_ts = -1;
    for (const auto& line : split_lines(log.out)) {
        auto space = line.find(' ');
        if (space != 40) {
            continue;
        }
        std::int64_t ts = 0;
        auto tail = line.substr(space + 1);
        auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), ts);
        if (ec != std::errc()) {
            continue;
        }
        if (ts <= *meta.closed_at && ts > best_ts) {
            best_ts = ts;
            best_oid = line.substr(0, 40);
        }
    }
    if (best_oid.empty() || !cache.resolve_commit(handle, best_oid)) {
        return fallback();
    }
    return {best_oid, base_provenance::reconstructed};
}

std::vector<std::pair<std::string, conflict_type>> list_conflicted_files(
    repo_cache& cache, const repo_handle& handle) {
    auto unmerged = cache.git(handle, {"ls-files", "-u", "-z"});
    if (!unmerged.ok()) {
        throw not_in_merge_state();
    }

    std::map<std::string, std::set<int>> stages_by_path;
    std::size_t pos = 0;
    const auto& out = unmerged.out;
    while (pos < out.size()) {
        auto nul = out.find('\0', pos);
        if (nul == std::string::npos) {
            break;
        }
        auto entry = out.substr(pos, nul - pos);
        pos = nul + 1;
        auto tab = entry.find('\t');
        if (tab == std::string::npos) {
            continue;
        }
        auto meta = entry.substr(0, tab);   // "mode oid stage"
        auto path = entry.substr(tab + 1);
        auto last_space = meta.rfind(' ');
        if (last_space == std::string::npos) {
            continue;
        }
        int stage = std::atoi(meta.c_str() + last_space + 1);
        stages_by_path[path].insert(stage);
    }

    if (stages_by_path.empty() && !merge_in_progress(cache, handle)) {
        throw not_in_merge_state();
    }

    std::vector<std::pair<std::string, conflict_type>> files;
    files.reserve(stages_by_path.size());
    for (const auto& [path, stages] : stages_by_path) {
        files.emplace_back(path, type_from_stages(stages));
    }
    return files;  // map iteration keeps paths sorted
}

void revert_merge_state(repo_cache& cache, const repo_handle& handle) {
    if (merge_in_progress(cache, handle)) {
        cache.git(handle, {"merge", "--abort"});
    }
    cache.git(handle, {"reset", "--hard", "--quiet", "HEAD"});
    // Detach from the analysis branch (a no-op commit-wise: the branch tip
    // is the base commit) and drop it.
    auto branch = cache.git(handle, {"rev-parse", "--abbrev-ref", "HEAD"});
    if (trim(branch.out) == analysis_branch) {
        cache.git(handle, {"checkout", "--quiet", "--detach", "HEAD"});
    }
    cache.git(handle, {"branch", "-D", analysis_branch});  // fails quietly when absent
    cache.git(handle, {"clean", "-ffdx", "--quiet"});
}

simulation_result simulate_merge(repo_cache& cache, const repo_handle& handle,
                                 const std::string& base_oid, const std::string& head_oid,
                                 const std::string& pr_key, int preview_lines) {
    simulation_result result;
    result.outcome.pr_key = pr_key;
    result.outcome.simulated_base_oid = base_oid;
    result.outcome.head_oid = head_oid;

    if (!cache.resolve_commit(handle, head_oid)) {
        result.outcome.label = merge_label::merge_error;
        result.outcome.error = merge_error_code::commit_unreachable;
        result.notes.push_back("head commit unreachable: " + head_oid);
        return result;
    }

    cache.git(handle, {"checkout", "--quiet", "-B", analysis_branch, base_oid});

    auto merge = cache.git(handle, {"merge", "--no-commit", "--no-ff", head_oid});
    if (merge.ok()) {
        result.outcome.label = merge_label::merge_clean;
        revert_merge_state(cache, handle);
        return result;
    }

    std::vector<std::pair<std::string, conflict_type>> conflicted;
    try {
        conflicted = list_conflicted_files(cache, handle);
    } catch (const not_in_merge_state&) {
        conflicted.clear();
    }
    if (conflicted.empty()) {
        result.outcome.label = merge_label::merge_error;
        result.outcome.error = merge_error_code::merge_tool_failure;
        result.notes.push_back("merge failed without conflict state: " +
                               std::string(trim(merge.err)));
        revert_merge_state(cache, handle);
        return result;
    }

    // Conflict extraction happens while the merge state is live, then the
    // repository is restored no matter what the parse produced.
    std::vector<file_scan_input> inputs;
    inputs.reserve(conflicted.size());
    for (const auto& [path, type] : conflicted) {
        file_scan_input input;
        input.path = path;
        input.type = type;
        if (type == conflict_type::both_modified || type == conflict_type::added_by_both) {
            auto file_path = handle.local_path / path;
            std::error_code ec;
            if (std::filesystem::exists(file_path, ec)) {
                input.bytes = read_file_bytes(file_path.string());
            }
        }
        inputs.push_back(std::move(input));
    }
    auto scans = scan_files_parallel(pr_key, inputs, preview_lines);

    revert_merge_state(cache, handle);

    result.outcome.label = merge_label::merge_conflict;
    for (auto& scan : scans) {
        result.files.push_back(scan.record);
        for (auto& region : scan.regions) {
            result.regions.push_back(std::move(region));
        }
        for (auto& note : scan.notes) {
            result.notes.push_back(std::move(note));
        }
    }
    result.outcome.metrics = compute_severity(result.files);
    return result;
}

}  // namespace mergemine

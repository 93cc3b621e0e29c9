#include "mergemine/pipeline.hpp"

#include "mergemine/attribution.hpp"
#include "mergemine/text_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace fs = std::filesystem;

namespace mergemine {

namespace {

using nlohmann::json;

std::int64_t now_epoch() {
    return static_cast<std::int64_t>(::time(nullptr));
}

json opt_ts_json(const std::optional<std::int64_t>& v) {
    return v ? json(*v) : json(nullptr);
}

std::optional<std::int64_t> opt_ts_from(const json& j, const char* key) {
    if (j.contains(key) && j[key].is_number_integer()) {
        return j[key].get<std::int64_t>();
    }
    return std::nullopt;
}

json record_to_json(const pull_request_record& rec, bool deferred) {
    json j;
    j["repo_full_name"] = rec.repo_full_name;
    j["pr_number"] = rec.pr_number;
    j["pr_key"] = rec.pr_key;
    j["agent"] = rec.agent;
    j["state"] = to_string(rec.state);
    j["created_at"] = opt_ts_json(rec.created_at);
    j["closed_at"] = opt_ts_json(rec.closed_at);
    j["merged_at"] = opt_ts_json(rec.merged_at);
    j["additions"] = rec.additions;
    j["deletions"] = rec.deletions;
    j["churn_known"] = rec.churn_known;
    j["inconsistent"] = rec.inconsistent;
    j["deferred"] = deferred;
    return j;
}

candidate_record record_from_json(const json& j) {
    candidate_record c;
    c.record.repo_full_name = j.value("repo_full_name", "");
    c.record.pr_number = j.value("pr_number", std::int64_t{0});
    c.record.pr_key = j.value("pr_key", "");
    c.record.agent = j.value("agent", "");
    c.record.state = pr_state_from_string(j.value("state", "unknown"));
    c.record.created_at = opt_ts_from(j, "created_at");
    c.record.closed_at = opt_ts_from(j, "closed_at");
    c.record.merged_at = opt_ts_from(j, "merged_at");
    c.record.additions = j.value("additions", std::int64_t{0});
    c.record.deletions = j.value("deletions", std::int64_t{0});
    c.record.churn_known = j.value("churn_known", false);
    c.record.inconsistent = j.value("inconsistent", false);
    c.deferred = j.value("deferred", false);
    return c;
}

json metadata_to_json(const pr_metadata& meta) {
    json j;
    j["pr_key"] = meta.pr_key;
    j["state"] = to_string(meta.state);
    j["created_at"] = opt_ts_json(meta.created_at);
    j["closed_at"] = opt_ts_json(meta.closed_at);
    j["merged_at"] = opt_ts_json(meta.merged_at);
    j["base_ref_name"] = meta.base_ref_name;
    j["head_ref_name"] = meta.head_ref_name;
    j["base_ref_oid"] = meta.base_ref_oid;
    j["head_ref_oid"] = meta.head_ref_oid;
    j["mergeable"] = to_string(meta.mergeable);
    return j;
}

pr_metadata metadata_from_json(const json& j) {
    pr_metadata meta;
    meta.pr_key = j.value("pr_key", "");
    meta.state = pr_state_from_string(j.value("state", "open"));
    meta.created_at = opt_ts_from(j, "created_at");
    meta.closed_at = opt_ts_from(j, "closed_at");
    meta.merged_at = opt_ts_from(j, "merged_at");
    meta.base_ref_name = j.value("base_ref_name", "");
    meta.head_ref_name = j.value("head_ref_name", "");
    meta.base_ref_oid = j.value("base_ref_oid", "");
    meta.head_ref_oid = j.value("head_ref_oid", "");
    meta.mergeable = mergeable_state_from_string(j.value("mergeable", "unknown"));
    return meta;
}

json repository_to_json(const repository_record& repo) {
    json j;
    j["repo_full_name"] = repo.repo_full_name;
    j["stars"] = repo.stars;
    j["forks"] = repo.forks;
    j["primary_language"] = repo.primary_language ? json(*repo.primary_language) : json(nullptr);
    j["is_archived"] = repo.is_archived;
    j["is_fork"] = repo.is_fork;
    return j;
}

repository_record repository_from_json(const json& j) {
    repository_record repo;
    repo.repo_full_name = j.value("repo_full_name", "");
    repo.stars = j.value("stars", std::int64_t{0});
    repo.forks = j.value("forks", std::int64_t{0});
    if (j.contains("primary_language") && j["primary_language"].is_string()) {
        repo.primary_language = j["primary_language"].get<std::string>();
    }
    repo.is_archived = j.value("is_archived", false);
    repo.is_fork = j.value("is_fork", false);
    return repo;
}

void append_line(const fs::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw std::runtime_error("cannot append to " + path.string());
    }
    out << line << '\n';
    out.flush();
    if (!out) {
        throw std::runtime_error("append failed: " + path.string());
    }
}

}  // namespace

int default_worker_count() {
    auto hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) {
        hw = 1;
    }
    return std::min(hw, 8);  // bound clone storms
}

// --- bundles ----------------------------------------------------------------

std::string bundle_to_json_line(const pr_bundle& bundle) {
    const auto& row = bundle.row;
    json j;
    j["pr_key"] = row.pr_key;
    j["repo_full_name"] = row.repo_full_name;
    j["pr_number"] = row.pr_number;
    j["agent"] = row.agent;
    j["state"] = to_string(row.state);
    j["created_at"] = opt_ts_json(row.created_at);
    j["closed_at"] = opt_ts_json(row.closed_at);
    j["merged_at"] = opt_ts_json(row.merged_at);
    j["base_ref_oid"] = row.base_ref_oid;
    j["head_ref_oid"] = row.head_ref_oid;
    j["simulated_base_oid"] = row.simulated_base_oid;
    j["mergeable"] = to_string(row.mergeable);
    j["outcome"] = row.outcome ? json(to_string(*row.outcome)) : json(nullptr);
    j["num_conflict_files"] = row.metrics.num_conflict_files;
    j["num_conflict_regions"] = row.metrics.num_conflict_regions;
    j["conflict_lines"] = row.metrics.conflict_lines;
    j["additions"] = row.additions ? json(*row.additions) : json(nullptr);
    j["deletions"] = row.deletions ? json(*row.deletions) : json(nullptr);
    j["status_code"] = row.status_code;
    j["base_provenance"] = to_string(row.provenance);
    j["fetch_attempts"] = row.fetch_attempts;
    j["fetch_http_status"] = row.fetch_http_status ? json(*row.fetch_http_status) : json(nullptr);

    j["files"] = json::array();
    for (const auto& f : bundle.files) {
        j["files"].push_back({{"file_path", f.file_path},
                              {"num_regions", f.num_regions},
                              {"conflict_lines", f.conflict_lines},
                              {"file_extension", f.file_extension},
                              {"conflict_type", to_string(f.type)}});
    }
    j["regions"] = json::array();
    for (const auto& r : bundle.regions) {
        j["regions"].push_back({{"file_path", r.file_path},
                                {"region_index", r.region_index},
                                {"start_line", r.start_line},
                                {"mid_line", r.mid_line},
                                {"end_line", r.end_line},
                                {"ours_len", r.ours_len},
                                {"theirs_len", r.theirs_len},
                                {"ours_hash", r.ours_hash},
                                {"theirs_hash", r.theirs_hash},
                                {"ours_preview", r.ours_preview},
                                {"theirs_preview", r.theirs_preview}});
    }
    j["commits"] = json::array();
    for (const auto& c : bundle.commits) {
        j["commits"].push_back(
            {{"file_path", c.file_path},
             {"head_last_touch_oid",
              c.head_last_touch_oid ? json(*c.head_last_touch_oid) : json(nullptr)},
             {"base_last_touch_oid",
              c.base_last_touch_oid ? json(*c.base_last_touch_oid) : json(nullptr)}});
    }
    j["repository"] = bundle.repository ? repository_to_json(*bundle.repository) : json(nullptr);
    return j.dump();
}

std::optional<pr_bundle> bundle_from_json_line(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("pr_key")) {
        return std::nullopt;
    }
    pr_bundle b;
    auto& row = b.row;
    row.pr_key = j.value("pr_key", "");
    row.repo_full_name = j.value("repo_full_name", "");
    row.pr_number = j.value("pr_number", std::int64_t{0});
    row.agent = j.value("agent", "");
    row.state = pr_state_from_string(j.value("state", "unknown"));
    row.created_at = opt_ts_from(j, "created_at");
    row.closed_at = opt_ts_from(j, "closed_at");
    row.merged_at = opt_ts_from(j, "merged_at");
    row.base_ref_oid = j.value("base_ref_oid", "");
    row.head_ref_oid = j.value("head_ref_oid", "");
    row.simulated_base_oid = j.value("simulated_base_oid", "");
    row.mergeable = mergeable_state_from_string(j.value("mergeable", "unknown"));
    if (j.contains("outcome") && j["outcome"].is_string()) {
        row.outcome = merge_label_from_string(j["outcome"].get<std::string>());
    }
    row.metrics.num_conflict_files = j.value("num_conflict_files", std::int64_t{0});
    row.metrics.num_conflict_regions = j.value("num_conflict_regions", std::int64_t{0});
    row.metrics.conflict_lines = j.value("conflict_lines", std::int64_t{0});
    row.additions = opt_ts_from(j, "additions");
    row.deletions = opt_ts_from(j, "deletions");
    row.status_code = j.value("status_code", "");
    auto provenance = j.value("base_provenance", "api_oid");
    if (provenance == "reconstructed") row.provenance = base_provenance::reconstructed;
    else if (provenance == "fallback") row.provenance = base_provenance::fallback;
    row.fetch_attempts = j.value("fetch_attempts", 0);
    if (j.contains("fetch_http_status") && j["fetch_http_status"].is_number_integer()) {
        row.fetch_http_status = j["fetch_http_status"].get<int>();
    }

    for (const auto& f : j.value("files", json::array())) {
        conflict_file_record rec;
        rec.pr_key = row.pr_key;
        rec.file_path = f.value("file_path", "");
        rec.num_regions = f.value("num_regions", std::int64_t{0});
        rec.conflict_lines = f.value("conflict_lines", std::int64_t{0});
        rec.file_extension = f.value("file_extension", "");
        rec.type = conflict_type_from_string(f.value("conflict_type", "both_modified"));
        b.files.push_back(std::move(rec));
    }
    for (const auto& r : j.value("regions", json::array())) {
        conflict_region region;
        region.pr_key = row.pr_key;
        region.file_path = r.value("file_path", "");
        region.region_index = r.value("region_index", 0);
        region.start_line = r.value("start_line", std::int64_t{0});
        region.mid_line = r.value("mid_line", std::int64_t{0});
        region.end_line = r.value("end_line", std::int64_t{0});
        region.ours_len = r.value("ours_len", std::int64_t{0});
        region.theirs_len = r.value("theirs_len", std::int64_t{0});
        region.ours_hash = r.value("ours_hash", "");
        region.theirs_hash = r.value("theirs_hash", "");
        for (const auto& line_item : r.value("ours_preview", json::array())) {
            if (line_item.is_string()) region.ours_preview.push_back(line_item.get<std::string>());
        }
        for (const auto& line_item : r.value("theirs_preview", json::array())) {
            if (line_item.is_string()) region.theirs_preview.push_back(line_item.get<std::string>());
        }
        b.regions.push_back(std::move(region));
    }
    for (const auto& c : j.value("commits", json::array())) {
        conflict_file_commit commit;
        commit.pr_key = row.pr_key;
        commit.file_path = c.value("file_path", "");
        if (c.contains("head_last_touch_oid") && c["head_last_touch_oid"].is_string()) {
            commit.head_last_touch_oid = c["head_last_touch_oid"].get<std::string>();
        }
        if (c.contains("base_last_touch_oid") && c["base_last_touch_oid"].is_string()) {
            commit.base_last_touch_oid = c["base_last_touch_oid"].get<std::string>();
        }
        b.commits.push_back(std::move(commit));
    }
    if (j.contains("repository") && j["repository"].is_object()) {
        b.repository = repository_from_json(j["repository"]);
    }
    return b;
}

entity_streams build_streams(const std::vector<pr_bundle>& bundles) {
    entity_streams streams;
    std::unordered_set<std::string> seen_prs;
    std::map<std::string, repository_record> repos;
    for (const auto& bundle : bundles) {
        if (!seen_prs.insert(bundle.row.pr_key).second) {
            continue;  // terminal entry per PR is unique; first bundle wins
        }
        streams.pull_requests.push_back(bundle.row);
        streams.conflict_files.insert(streams.conflict_files.end(), bundle.files.begin(),
                                      bundle.files.end());
        streams.conflict_regions.insert(streams.conflict_regions.end(), bundle.regions.begin(),
                                        bundle.regions.end());
        streams.conflict_file_commits.insert(streams.conflict_file_commits.end(),
                                             bundle.commits.begin(), bundle.commits.end());
        if (bundle.repository && !repos.count(bundle.repository->repo_full_name)) {
            repos[bundle.repository->repo_full_name] = *bundle.repository;
        }
    }
    for (const auto& row : streams.pull_requests) {
        if (!repos.count(row.repo_full_name)) {
            repository_record def;
            def.repo_full_name = row.repo_full_name;
            repos[row.repo_full_name] = def;
        }
    }
    for (auto& [name, repo] : repos) {
        streams.repositories.push_back(repo);
    }
    return streams;
}

// --- ingest -----------------------------------------------------------------

ingest_output ingest_stage(const pipeline_config& config) {
    auto loaded = load_corpus(config.corpus_path, config.format);
    auto filtered = filter_candidates(loaded.records);

    fs::create_directories(config.out_dir);
    {
        std::ofstream out(config.out_dir / candidates_file, std::ios::trunc);
        for (const auto& c : filtered.retained) {
            out << record_to_json(c.record, c.deferred).dump() << '\n';
        }
    }
    {
        json report;
        report["input_records"] = loaded.records.size() + loaded.issues.size();
        report["retained"] = filtered.retained.size();
        report["excluded"] = filtered.excluded.size();
        report["issues"] = json::array();
        for (const auto& issue : loaded.issues) {
            report["issues"].push_back({{"row", issue.row}, {"reason", issue.reason}});
        }
        report["excluded_records"] = json::array();
        for (const auto& ex : filtered.excluded) {
            report["excluded_records"].push_back(
                {{"pr_key", ex.record.pr_key}, {"reason", ex.reason}});
        }
        write_file_bytes((config.out_dir / ingest_report_file).string(), report.dump(2) + "\n");
    }

    ingest_output out;
    out.candidates = std::move(filtered.retained);
    out.excluded = static_cast<std::int64_t>(filtered.excluded.size());
    out.issues = static_cast<std::int64_t>(loaded.issues.size());
    return out;
}

std::vector<candidate_record> load_candidates(const fs::path& out_dir) {
    auto path = out_dir / candidates_file;
    if (!fs::exists(path)) {
        throw std::runtime_error("missing stage output " + path.string() +
                                 " (run the ingest stage first)");
    }
    std::vector<candidate_record> candidates;
    for (const auto& line : split_lines(read_file_bytes(path.string()))) {
        if (trim(line).empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            candidates.push_back(record_from_json(j));
        }
    }
    return candidates;
}

// --- fetch ------------------------------------------------------------------

metadata_map fetch_stage(const pipeline_config& config,
                         const std::vector<candidate_record>& candidates,
                         std::shared_ptr<http_transport> transport, run_log& log) {
    auto metadata_path = config.out_dir / metadata_file;
    metadata_map results;

    if (config.offline) {
        if (!fs::exists(metadata_path)) {
            throw std::runtime_error("offline mode needs existing " + metadata_path.string());
        }
        return load_metadata(config.out_dir);
    }

    // Previously fetched keys are not re-queried; the metadata file is the
    // fetch stage's durable output.
    if (fs::exists(metadata_path)) {
        results = load_metadata(config.out_dir);
    }

    token_pool pool(config.tokens);
    github_client_options options;
    options.api_url = config.api_url;
    options.retry = config.retry;
    github_client client(transport ? transport : make_httplib_transport(), pool, options);

    for (const auto& candidate : candidates) {
        const auto& key = candidate.record.pr_key;
        if (results.count(key)) {
            continue;
        }
        auto result = client.fetch_pr_metadata(key);

        json j;
        j["pr_key"] = key;
        j["status"] = {{"code", to_string(result.status.code)},
                       {"http_status", result.status.http_status
                                           ? json(*result.status.http_status)
                                           : json(nullptr)},
                       {"attempts", result.status.attempts}};
        j["metadata"] = result.metadata ? metadata_to_json(*result.metadata) : json(nullptr);
        j["repository"] = result.repository ? repository_to_json(*result.repository)
                                            : json(nullptr);
        append_line(metadata_path, j.dump());

        run_log_entry entry;
        entry.pr_key = key;
        entry.phase = run_phase::fetch;
        entry.status_code = to_string(result.status.code);
        entry.timestamp = now_epoch();
        entry.attempt = result.status.attempts;
        entry.terminal = false;  // terminal accounting happens in simulate
        log.append(entry);

        results[key] = std::move(result);
    }
    return results;
}

metadata_map load_metadata(const fs::path& out_dir) {
    auto path = out_dir / metadata_file;
    metadata_map results;
    if (!fs::exists(path)) {
        throw std::runtime_error("missing stage output " + path.string() +
                                 " (run the fetch stage first)");
    }
    for (const auto& line : split_lines(read_file_bytes(path.string()))) {
        if (trim(line).empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("pr_key")) {
            continue;
        }
        fetch_result result;
        auto code = j["status"].value("code", "SERVER_ERROR");
        result.status.attempts = j["status"].value("attempts", 0);
        if (j["status"].contains("http_status") && j["status"]["http_status"].is_number()) {
            result.status.http_status = j["status"]["http_status"].get<int>();
        }
        result.status.code = fetch_code::server_error;
        for (auto candidate_code :
             {fetch_code::ok, fetch_code::rate_limited, fetch_code::not_found, fetch_code::gone,
              fetch_code::legal_block, fetch_code::server_error, fetch_code::auth_failed,
              fetch_code::exhausted_retries}) {
            if (to_string(candidate_code) == code) {
                result.status.code = candidate_code;
            }
        }
        if (j.contains("metadata") && j["metadata"].is_object()) {
            result.metadata = metadata_from_json(j["metadata"]);
        }
        if (j.contains("repository") && j["repository"].is_object()) {
            result.repository = repository_from_json(j["repository"]);
        }
        results[j.value("pr_key", "")] = std::move(result);
    }
    return results;
}

// --- simulate ---------------------------------------------------------------

namespace {

pull_request_row row_skeleton(const candidate_record& candidate) {
    pull_request_row row;
    const auto& rec = candidate.record;
    row.pr_key = rec.pr_key;
    row.repo_full_name = rec.repo_full_name;
    row.pr_number = rec.pr_number;
    row.agent = rec.agent;
    row.state = rec.state;
    row.created_at = rec.created_at;
    row.closed_at = rec.closed_at;
    row.merged_at = rec.merged_at;
    if (rec.churn_known) {
        row.additions = rec.additions;
        row.deletions = rec.deletions;
    }
    return row;
}

struct pr_task_context {
    const pipeline_config& config;
    repo_cache& cache;
    run_log& log;
    std::mutex& bundle_mutex;
    const fs::path bundle_path;
    // Drains the calling thread's accumulated git invocations; the
    // terminal run-log entry of each PR carries them verbatim.
    std::function<std::vector<std::string>()> take_commands;
};

void log_entry(pr_task_context& ctx, const std::string& pr_key, run_phase phase,
               const std::string& status, const std::string& message, bool terminal,
               std::vector<std::string> commands = {}) {
    run_log_entry entry;
    entry.pr_key = pr_key;
    entry.phase = phase;
    entry.status_code = status;
    entry.message = message;
    entry.timestamp = now_epoch();
    entry.terminal = terminal;
    entry.commands = std::move(commands);
    ctx.log.append(entry);
}

void finish(pr_task_context& ctx, const pr_bundle& bundle, run_phase phase,
            const std::string& message) {
    {
        std::lock_guard lock(ctx.bundle_mutex);
        append_line(ctx.bundle_path, bundle_to_json_line(bundle));
    }
    log_entry(ctx, bundle.row.pr_key, phase, bundle.row.status_code, message, true,
              ctx.take_commands ? ctx.take_commands() : std::vector<std::string>{});
}

// One PR end to end: decide, prepare, simulate, extract. All failure paths
// produce a bundle with a terminal status; nothing is dropped.
void process_pr(pr_task_context& ctx, const candidate_record& candidate,
                const fetch_result* fetched, const repo_handle* handle) {
    auto row = row_skeleton(candidate);
    pr_bundle bundle;

    if (fetched == nullptr) {
        row.status_code = "NO_METADATA";
        bundle.row = row;
        finish(ctx, bundle, run_phase::prepare, "no metadata record for candidate");
        return;
    }

    row.fetch_attempts = fetched->status.attempts;
    row.fetch_http_status = fetched->status.http_status;
    if (fetched->repository) {
        bundle.repository = fetched->repository;
    }

    if (fetched->status.code != fetch_code::ok) {
        row.status_code = to_string(fetched->status.code);
        bundle.row = row;
        finish(ctx, bundle, run_phase::fetch, "metadata retrieval failed");
        return;
    }

    const auto& meta = *fetched->metadata;
    row.state = meta.state;
    row.created_at = meta.created_at ? meta.created_at : row.created_at;
    row.closed_at = meta.closed_at ? meta.closed_at : row.closed_at;
    row.merged_at = meta.merged_at ? meta.merged_at : row.merged_at;
    row.base_ref_oid = meta.base_ref_oid;
    row.head_ref_oid = meta.head_ref_oid;
    row.mergeable = meta.mergeable;

    // The deferred half of corpus filtering: metadata has the last word on
    // whether the PR was actually merged.
    if (meta.state == pr_state::merged || meta.merged_at.has_value()) {
        row.status_code = "EXCLUDED_MERGED";
        bundle.row = row;
        finish(ctx, bundle, run_phase::prepare, "merged per metadata; excluded from simulation");
        return;
    }

    if (handle == nullptr) {
        row.outcome = merge_label::merge_error;
        row.status_code = to_string(merge_error_code::repo_unavailable);
        bundle.row = row;
        finish(ctx, bundle, run_phase::prepare, "repository unavailable");
        return;
    }

    try {
        auto base = resolve_merge_base(meta, ctx.cache, *handle);
        row.provenance = base.provenance;
        row.simulated_base_oid = base.oid;
        ctx.cache.prepare_worktree(*handle, base.oid);
        log_entry(ctx, row.pr_key, run_phase::prepare, "OK", "worktree at " + base.oid, false);

        auto sim = simulate_merge(ctx.cache, *handle, base.oid, meta.head_ref_oid, row.pr_key,
                                  ctx.config.preview_lines);
        row.outcome = sim.outcome.label;
        row.metrics = sim.outcome.metrics;
        switch (sim.outcome.label) {
            case merge_label::merge_clean:
                row.status_code = "MERGE_CLEAN";
                break;
            case merge_label::merge_conflict:
                row.status_code = "MERGE_CONFLICT";
                break;
            case merge_label::merge_error:
                row.status_code = to_string(sim.outcome.error.value_or(
                    merge_error_code::merge_tool_failure));
                break;
        }
        bundle.files = std::move(sim.files);
        bundle.regions = std::move(sim.regions);

        std::string note;
        for (const auto& n : sim.notes) {
            note += (note.empty() ? "" : "; ") + n;
        }

        if (sim.outcome.label == merge_label::merge_conflict) {
            log_entry(ctx, row.pr_key, run_phase::simulate, row.status_code, note, false);
            for (const auto& file : bundle.files) {
                bundle.commits.push_back(attribute_file(ctx.cache, *handle, row.pr_key,
                                                        file.file_path, meta.head_ref_oid,
                                                        base.oid));
            }
            bundle.row = row;
            finish(ctx, bundle, run_phase::extract,
                   "extracted " + std::to_string(bundle.regions.size()) + " regions");
        } else {
            bundle.row = row;
            finish(ctx, bundle, run_phase::simulate, note);
        }
    } catch (const repo_cache_error& e) {
        row.outcome = merge_label::merge_error;
        switch (e.code()) {
            case repo_error_code::commit_unreachable:
                row.status_code = to_string(merge_error_code::commit_unreachable);
                break;
            case repo_error_code::clone_failed:
            case repo_error_code::corrupt_cache:
                row.status_code = to_string(merge_error_code::repo_unavailable);
                break;
        }
        bundle.row = row;
        finish(ctx, bundle, run_phase::prepare, e.what());
    }
}

}  // namespace

pipeline_summary simulate_stage(const pipeline_config& config,
                                const std::vector<candidate_record>& candidates,
                                const metadata_map& metadata, run_log& log) {
    pipeline_summary summary;
    fs::create_directories(config.out_dir);
    auto bundle_path = config.out_dir / bundles_file;

    std::unordered_set<std::string> done;
    if (config.resume) {
        done = run_log::terminal_keys(config.out_dir / run_log_file);
    } else {
        // A fresh (non-resume) run starts from clean stage outputs.
        std::error_code ec;
        fs::remove(bundle_path, ec);
    }

    repo_cache_options cache_options;
    cache_options.cache_root = config.cache_dir;
    cache_options.remote_base = config.remote_base;
    cache_options.offline = config.offline;
    repo_cache cache(cache_options);

    std::mutex audit_mutex;
    std::map<std::thread::id, std::vector<std::string>> audit_by_thread;
    cache.set_audit_hook([&](const std::string& line) {
        std::lock_guard lock(audit_mutex);
        audit_by_thread[std::this_thread::get_id()].push_back(line);
    });
    auto take_commands = [&]() -> std::vector<std::string> {
        std::lock_guard lock(audit_mutex);
        std::vector<std::string> commands;
        commands.swap(audit_by_thread[std::this_thread::get_id()]);
        return commands;
    };

    std::mutex bundle_mutex;
    pr_task_context ctx{config, cache, log, bundle_mutex, bundle_path, take_commands};

    // Group candidates by repository; one repository is one task so its
    // PRs never touch the worktree concurrently.
    std::map<std::string, std::vector<std::size_t>> by_repo;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (done.count(candidates[i].record.pr_key)) {
            summary.skipped_resume += 1;
            continue;
        }
        by_repo[candidates[i].record.repo_full_name].push_back(i);
    }
    std::vector<const std::string*> repo_queue;
    repo_queue.reserve(by_repo.size());
    for (const auto& [repo, indices] : by_repo) {
        repo_queue.push_back(&repo);
    }

    std::atomic<std::size_t> next_repo{0};
    auto worker = [&] {
        for (;;) {
            auto idx = next_repo.fetch_add(1);
            if (idx >= repo_queue.size()) {
                return;
            }
            const auto& repo = *repo_queue[idx];
            auto repo_lock_handle = cache.lock_repo(repo);

            std::optional<repo_handle> handle;
            bool needs_repo = false;
            for (auto ci : by_repo[repo]) {
                const auto& key = candidates[ci].record.pr_key;
                auto it = metadata.find(key);
                if (it != metadata.end() && it->second.status.code == fetch_code::ok &&
                    it->second.metadata &&
                    it->second.metadata->state != pr_state::merged) {
                    needs_repo = true;
                }
            }
            if (needs_repo) {
                try {
                    handle = cache.ensure_repo(repo);
                } catch (const repo_cache_error&) {
                    handle.reset();
                }
            }

            for (auto ci : by_repo[repo]) {
                const auto& candidate = candidates[ci];
                auto it = metadata.find(candidate.record.pr_key);
                process_pr(ctx, candidate, it == metadata.end() ? nullptr : &it->second,
                           handle ? &*handle : nullptr);
            }
        }
    };

    int worker_count = config.workers > 0 ? config.workers : default_worker_count();
    worker_count = std::max(1, worker_count);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(worker_count));
    for (int i = 0; i < worker_count; ++i) {
        threads.emplace_back(worker);
    }
    for (auto& t : threads) {
        t.join();
    }

    // Emission: single writer over everything accumulated so far.
    std::vector<pr_bundle> bundles;
    if (fs::exists(bundle_path)) {
        for (const auto& line : split_lines(read_file_bytes(bundle_path.string()))) {
            if (trim(line).empty()) {
                continue;
            }
            if (auto bundle = bundle_from_json_line(line)) {
                bundles.push_back(std::move(*bundle));
            }
        }
    }
    auto streams = build_streams(bundles);
    emit_tables(streams, config.out_dir, config.variant);
    summary.emitted = true;

    for (const auto& row : streams.pull_requests) {
        summary.terminal_counts[row.status_code] += 1;
    }
    summary.processed =
        static_cast<std::int64_t>(streams.pull_requests.size()) - summary.skipped_resume;
    if (summary.processed < 0) {
        summary.processed = 0;
    }
    return summary;
}

// --- analyze ----------------------------------------------------------------

analyze_output analyze_stage(const fs::path& out_dir) {
    auto table_path = out_dir / "pull_request.csv";
    if (!fs::exists(table_path)) {
        throw std::runtime_error("missing stage output " + table_path.string() +
                                 " (run the simulate stage first)");
    }
    auto rows = load_pull_request_table(table_path);

    analyze_output out;
    out.rates = per_agent_stats(rows);
    out.severity = severity_summary(rows);
    out.deciles = churn_deciles(rows);

    write_agent_rates_csv(out_dir / "agent_rates.csv", out.rates);
    write_severity_hist_csv(out_dir / "severity_hist.csv", out.severity.hist);
    write_churn_deciles_csv(out_dir / "churn_deciles.csv", out.deciles);
    return out;
}

// --- full run -----------------------------------------------------------

pipeline_summary run_pipeline(const pipeline_config& config,
                              std::shared_ptr<http_transport> transport) {
    check_git_version();
    auto ingest = ingest_stage(config);
    pipeline_summary summary;
    summary.excluded_ingest = ingest.excluded;
    if (ingest.candidates.empty()) {
        return summary;  // "no work": not emitted, not ok
    }

    run_log log(config.out_dir / run_log_file);
    auto metadata = fetch_stage(config, ingest.candidates, std::move(transport), log);
    auto sim = simulate_stage(config, ingest.candidates, metadata, log);
    summary.terminal_counts = std::move(sim.terminal_counts);
    summary.processed = sim.processed;
    summary.skipped_resume = sim.skipped_resume;
    summary.emitted = sim.emitted;

    analyze_stage(config.out_dir);
    return summary;
}

}  // namespace mergemine

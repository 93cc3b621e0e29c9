#include "mergemine/dataset.hpp"

#include "mergemine/csv.hpp"
#include "mergemine/sha256.hpp"
#include "mergemine/text_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <unordered_map>

namespace mergemine {

namespace {

using nlohmann::json;

std::string opt_ts(const std::optional<std::int64_t>& ts) {
    return ts ? format_timestamp(*ts) : std::string{};
}

std::string opt_int(const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : std::string{};
}

std::string bool_cell(bool v) {
    return v ? "true" : "false";
}

std::string preview_cell(const std::vector<std::string>& lines) {
    std::string joined;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) {
            joined.push_back('\n');
        }
        joined += lines[i];
    }
    return utf8_sanitize(joined);
}

const std::vector<std::string> pull_request_columns_clean = {
    "pr_key",        "repo_full_name",     "pr_number",           "agent",
    "state",         "created_at",         "closed_at",           "merged_at",
    "base_ref_oid",  "head_ref_oid",       "simulated_base_oid",  "mergeable_signal",
    "outcome",       "num_conflict_files", "num_conflict_regions", "conflict_lines",
    "additions",     "deletions",          "status_code",
};

const std::vector<std::string> pull_request_columns_raw_extra = {
    "base_provenance",
    "fetch_attempts",
    "fetch_http_status",
};

}  // namespace

std::string to_string(merge_label label) {
    switch (label) {
        case merge_label::merge_clean: return "merge_clean";
        case merge_label::merge_conflict: return "merge_conflict";
        case merge_label::merge_error: return "merge_error";
    }
    return "merge_error";
}

std::optional<merge_label> merge_label_from_string(std::string_view text) {
    if (text == "merge_clean") return merge_label::merge_clean;
    if (text == "merge_conflict") return merge_label::merge_conflict;
    if (text == "merge_error") return merge_label::merge_error;
    return std::nullopt;
}

std::string to_string(merge_error_code code) {
    switch (code) {
        case merge_error_code::commit_unreachable: return "COMMIT_UNREACHABLE";
        case merge_error_code::repo_unavailable: return "REPO_UNAVAILABLE";
        case merge_error_code::merge_tool_failure: return "MERGE_TOOL_FAILURE";
    }
    return "MERGE_TOOL_FAILURE";
}

std::string to_string(mergeable_state state) {
    switch (state) {
        case mergeable_state::mergeable: return "mergeable";
        case mergeable_state::conflicting: return "conflicting";
        case mergeable_state::unknown: return "unknown";
    }
    return "unknown";
}

mergeable_state mergeable_state_from_string(std::string_view text) {
    if (iequals(text, "mergeable")) return mergeable_state::mergeable;
    if (iequals(text, "conflicting")) return mergeable_state::conflicting;
    return mergeable_state::unknown;
}

std::string to_string(base_provenance provenance) {
    switch (provenance) {
        case base_provenance::api_oid: return "api_oid";
        case base_provenance::reconstructed: return "reconstructed";
        case base_provenance::fallback: return "fallback";
    }
    return "api_oid";
}

std::string to_string(run_phase phase) {
    switch (phase) {
        case run_phase::fetch: return "fetch";
        case run_phase::prepare: return "prepare";
        case run_phase::simulate: return "simulate";
        case run_phase::extract: return "extract";
    }
    return "fetch";
}

std::string to_string(dataset_variant variant) {
    return variant == dataset_variant::raw ? "raw" : "clean";
}

// --- run log --------------------------------------------------------------

run_log::run_log(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) {
        throw std::runtime_error("cannot open run log for append: " + path.string());
    }
}

std::string run_log_entry_to_json(const run_log_entry& entry) {
    json j;
    j["pr_key"] = entry.pr_key;
    j["phase"] = to_string(entry.phase);
    j["status"] = entry.status_code;
    j["message"] = utf8_sanitize(entry.message);
    j["timestamp"] = entry.timestamp;
    j["attempt"] = entry.attempt;
    j["terminal"] = entry.terminal;
    if (!entry.commands.empty()) {
        j["commands"] = entry.commands;
    }
    return j.dump();
}

void run_log::append(const run_log_entry& entry) {
    std::lock_guard lock(mutex_);
    if (!out_) {
        throw std::runtime_error("run log is not open");
    }
    out_ << run_log_entry_to_json(entry) << '\n';
    out_.flush();
    if (!out_) {
        throw std::runtime_error("run log write failed");
    }
}

std::vector<run_log_entry> run_log::load(const std::filesystem::path& path) {
    std::vector<run_log_entry> entries;
    if (!std::filesystem::exists(path)) {
        return entries;
    }
    for (const auto& line : split_lines(read_file_bytes(path.string()))) {
        if (trim(line).empty()) {
            continue;
        }
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            continue;  // torn tail line from an interrupted run
        }
        run_log_entry e;
        e.pr_key = j.value("pr_key", "");
        auto phase = j.value("phase", "fetch");
        if (phase == "prepare") e.phase = run_phase::prepare;
        else if (phase == "simulate") e.phase = run_phase::simulate;
        else if (phase == "extract") e.phase = run_phase::extract;
        else e.phase = run_phase::fetch;
        e.status_code = j.value("status", "");
        e.message = j.value("message", "");
        e.timestamp = j.value("timestamp", std::int64_t{0});
        e.attempt = j.value("attempt", 0);
        e.terminal = j.value("terminal", false);
        if (j.contains("commands") && j["commands"].is_array()) {
            for (const auto& c : j["commands"]) {
                if (c.is_string()) {
                    e.commands.push_back(c.get<std::string>());
                }
            }
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::unordered_set<std::string> run_log::terminal_keys(const std::filesystem::path& path) {
    std::unordered_set<std::string> keys;
    for (const auto& e : load(path)) {
        if (e.terminal) {
            keys.insert(e.pr_key);
        }
    }
    return keys;
}

// --- table emission -------------------------------------------------------

namespace {

void check_integrity(const entity_streams& streams) {
    std::unordered_set<std::string> pr_keys;
    std::unordered_set<std::string> conflicting_keys;
    for (const auto& row : streams.pull_requests) {
        pr_keys.insert(row.pr_key);
        if (row.outcome == merge_label::merge_conflict) {
            conflicting_keys.insert(row.pr_key);
        }
    }
    std::unordered_set<std::string> file_keys;
    for (const auto& f : streams.conflict_files) {
        if (!pr_keys.count(f.pr_key)) {
            throw integrity_error(f.pr_key,
                                  "conflict_file references unknown pr_key " + f.pr_key);
        }
        if (!conflicting_keys.count(f.pr_key)) {
            throw integrity_error(f.pr_key, "conflict_file rows exist for " + f.pr_key +
                                                " but its outcome is not merge_conflict");
        }
        file_keys.insert(f.pr_key + "\x1f" + f.file_path);
    }
    for (const auto& r : streams.conflict_regions) {
        if (!pr_keys.count(r.pr_key)) {
            throw integrity_error(r.pr_key,
                                  "conflict_region references unknown pr_key " + r.pr_key);
        }
        if (!file_keys.count(r.pr_key + "\x1f" + r.file_path)) {
            throw integrity_error(r.pr_key + ":" + r.file_path,
                                  "conflict_region references unknown file " + r.file_path +
                                      " of " + r.pr_key);
        }
    }
    for (const auto& c : streams.conflict_file_commits) {
        if (!pr_keys.count(c.pr_key)) {
            throw integrity_error(c.pr_key,
                                  "conflict_file_commit references unknown pr_key " + c.pr_key);
        }
    }
    // Severity counters must agree with the child tables.
    std::unordered_map<std::string, std::int64_t> regions_per_pr;
    for (const auto& r : streams.conflict_regions) {
        regions_per_pr[r.pr_key] += 1;
    }
    std::unordered_map<std::string, std::int64_t> files_per_pr;
    for (const auto& f : streams.conflict_files) {
        files_per_pr[f.pr_key] += 1;
    }
    for (const auto& row : streams.pull_requests) {
        if (row.outcome == merge_label::merge_conflict) {
            auto files = files_per_pr.count(row.pr_key) ? files_per_pr[row.pr_key] : 0;
            auto regions = regions_per_pr.count(row.pr_key) ? regions_per_pr[row.pr_key] : 0;
            if (files != row.metrics.num_conflict_files ||
                regions != row.metrics.num_conflict_regions) {
                throw integrity_error(row.pr_key, "severity counters disagree with child tables for " +
                                                      row.pr_key);
            }
        }
    }
}

table_manifest_entry write_table(const std::filesystem::path& out_dir, const std::string& name,
                                 const std::vector<std::string>& header,
                                 const std::vector<std::vector<std::string>>& rows) {
    auto path = out_dir / name;
    csv_writer writer(path.string());
    writer.write_row(header);
    for (const auto& row : rows) {
        writer.write_row(row);
    }
    writer.close();
    return {name, static_cast<std::int64_t>(rows.size()), sha256_file_hex(path.string())};
}

}  // namespace

emit_manifest emit_tables(const entity_streams& streams, const std::filesystem::path& out_dir,
                          dataset_variant variant) {
    check_integrity(streams);
    std::filesystem::create_directories(out_dir);

    emit_manifest manifest;
    manifest.variant = variant;

    // repository.csv
    {
        auto repos = streams.repositories;
        std::sort(repos.begin(), repos.end(),
                  [](const auto& a, const auto& b) { return a.repo_full_name < b.repo_full_name; });
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : repos) {
            rows.push_back({r.repo_full_name, std::to_string(r.stars), std::to_string(r.forks),
                            r.primary_language.value_or(""), bool_cell(r.is_archived),
                            bool_cell(r.is_fork)});
        }
        manifest.tables.push_back(write_table(
            out_dir, "repository.csv",
            {"repo_full_name", "stars", "forks", "primary_language", "is_archived", "is_fork"},
            rows));
    }

    // pull_request.csv
    {
        auto prs = streams.pull_requests;
        std::sort(prs.begin(), prs.end(),
                  [](const auto& a, const auto& b) { return a.pr_key < b.pr_key; });
        auto header = pull_request_columns_clean;
        if (variant == dataset_variant::raw) {
            header.insert(header.end(), pull_request_columns_raw_extra.begin(),
                          pull_request_columns_raw_extra.end());
        }
        std::vector<std::vector<std::string>> rows;
        for (const auto& p : prs) {
            std::vector<std::string> row = {
                p.pr_key,
                p.repo_full_name,
                std::to_string(p.pr_number),
                p.agent,
                to_string(p.state),
                opt_ts(p.created_at),
                opt_ts(p.closed_at),
                opt_ts(p.merged_at),
                p.base_ref_oid,
                p.head_ref_oid,
                p.simulated_base_oid,
                to_string(p.mergeable),
                p.outcome ? to_string(*p.outcome) : "",
                std::to_string(p.metrics.num_conflict_files),
                std::to_string(p.metrics.num_conflict_regions),
                std::to_string(p.metrics.conflict_lines),
                opt_int(p.additions),
                opt_int(p.deletions),
                p.status_code,
            };
            if (variant == dataset_variant::raw) {
                row.push_back(to_string(p.provenance));
                row.push_back(std::to_string(p.fetch_attempts));
                row.push_back(p.fetch_http_status ? std::to_string(*p.fetch_http_status) : "");
            }
            rows.push_back(std::move(row));
        }
        manifest.tables.push_back(write_table(out_dir, "pull_request.csv", header, rows));
    }

    // conflict_file.csv
    {
        auto files = streams.conflict_files;
        std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
            return std::tie(a.pr_key, a.file_path) < std::tie(b.pr_key, b.file_path);
        });
        std::vector<std::vector<std::string>> rows;
        for (const auto& f : files) {
            rows.push_back({f.pr_key, f.file_path, std::to_string(f.num_regions),
                            std::to_string(f.conflict_lines), f.file_extension,
                            to_string(f.type)});
        }
        manifest.tables.push_back(
            write_table(out_dir, "conflict_file.csv",
                        {"pr_key", "file_path", "num_regions", "conflict_lines", "file_extension",
                         "conflict_type"},
                        rows));
    }

    // conflict_region.csv
    {
        auto regions = streams.conflict_regions;
        std::sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) {
            return std::tie(a.pr_key, a.file_path, a.region_index) <
                   std::tie(b.pr_key, b.file_path, b.region_index);
        });
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : regions) {
            rows.push_back({r.pr_key, r.file_path, std::to_string(r.region_index),
                            std::to_string(r.start_line), std::to_string(r.mid_line),
                            std::to_string(r.end_line), std::to_string(r.ours_len),
                            std::to_string(r.theirs_len), r.ours_hash, r.theirs_hash,
                            preview_cell(r.ours_preview), preview_cell(r.theirs_preview)});
        }
        manifest.tables.push_back(
            write_table(out_dir, "conflict_region.csv",
                        {"pr_key", "file_path", "region_index", "start_line", "mid_line",
                         "end_line", "ours_len", "theirs_len", "ours_hash", "theirs_hash",
                         "ours_preview", "theirs_preview"},
                        rows));
    }

    // conflict_file_commit.csv
    {
        auto commits = streams.conflict_file_commits;
        std::sort(commits.begin(), commits.end(), [](const auto& a, const auto& b) {
            return std::tie(a.pr_key, a.file_path) < std::tie(b.pr_key, b.file_path);
        });
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : commits) {
            rows.push_back({c.pr_key, c.file_path, c.head_last_touch_oid.value_or(""),
                            c.base_last_touch_oid.value_or("")});
        }
        manifest.tables.push_back(write_table(
            out_dir, "conflict_file_commit.csv",
            {"pr_key", "file_path", "head_last_touch_oid", "base_last_touch_oid"}, rows));
    }

    // manifest.json (deterministic: no timestamps)
    {
        json j;
        j["variant"] = to_string(variant);
        j["tables"] = json::array();
        for (const auto& t : manifest.tables) {
            j["tables"].push_back({{"file", t.file}, {"rows", t.rows}, {"sha256", t.sha256}});
        }
        write_file_bytes((out_dir / "manifest.json").string(), j.dump(2) + "\n");
    }
    return manifest;
}

std::vector<pull_request_row> load_pull_request_table(const std::filesystem::path& csv_path) {
    auto rows = csv_parse(read_file_bytes(csv_path.string()));
    if (rows.empty()) {
        throw std::runtime_error("pull_request table has no header: " + csv_path.string());
    }
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        col[rows[0][i]] = i;
    }
    auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= row.size()) {
            return {};
        }
        return row[it->second];
    };
    std::vector<pull_request_row> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() == 1 && row[0].empty()) {
            continue;
        }
        pull_request_row p;
        p.pr_key = cell(row, "pr_key");
        p.repo_full_name = cell(row, "repo_full_name");
        p.pr_number = std::atoll(cell(row, "pr_number").c_str());
        p.agent = cell(row, "agent");
        p.state = pr_state_from_string(cell(row, "state"));
        p.created_at = parse_timestamp(cell(row, "created_at"));
        p.closed_at = parse_timestamp(cell(row, "closed_at"));
        p.merged_at = parse_timestamp(cell(row, "merged_at"));
        p.base_ref_oid = cell(row, "base_ref_oid");
        p.head_ref_oid = cell(row, "head_ref_oid");
        p.simulated_base_oid = cell(row, "simulated_base_oid");
        p.mergeable = mergeable_state_from_string(cell(row, "mergeable_signal"));
        p.outcome = merge_label_from_string(cell(row, "outcome"));
        p.metrics.num_conflict_files = std::atoll(cell(row, "num_conflict_files").c_str());
        p.metrics.num_conflict_regions = std::atoll(cell(row, "num_conflict_regions").c_str());
        p.metrics.conflict_lines = std::atoll(cell(row, "conflict_lines").c_str());
        auto adds = cell(row, "additions");
        auto dels = cell(row, "deletions");
        if (!adds.empty()) {
            p.additions = std::atoll(adds.c_str());
        }
        if (!dels.empty()) {
            p.deletions = std::atoll(dels.c_str());
        }
        p.status_code = cell(row, "status_code");
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace mergemine

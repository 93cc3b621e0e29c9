#include "mergemine/corpus.hpp"

#include "mergemine/csv.hpp"
#include "mergemine/text_util.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <charconv>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mergemine {

namespace {

using nlohmann::json;

bool valid_repo_name(const std::string& name) {
    auto slash = name.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == name.size()) {
        return false;
    }
    if (name.find('/', slash + 1) != std::string::npos) {
        return false;
    }
    if (name.find('#') != std::string::npos) {
        return false;
    }
    return true;
}

// Decimal with optional leading zeros ("0012" -> 12).
std::optional<std::int64_t> parse_pr_number(std::string_view text) {
    auto t = trim(text);
    if (t.empty() || t.size() > 18) {
        return std::nullopt;
    }
    for (char c : t) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            return std::nullopt;
        }
    }
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::int64_t> parse_count(std::string_view text) {
    auto t = trim(text);
    if (t.empty()) {
        return std::nullopt;
    }
    // Tolerate float-formatted exports ("12.0").
    double d = 0;
    try {
        std::size_t used = 0;
        d = std::stod(std::string(t), &used);
        if (used != t.size() || d < 0) {
            return std::nullopt;
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return static_cast<std::int64_t>(d);
}

// Normalizes a parsed row into a record; returns an issue reason on
// rejection.
std::optional<std::string> finish_record(pull_request_record& rec) {
    if (rec.repo_full_name.empty()) {
        return "missing repo_full_name";
    }
    if (!valid_repo_name(rec.repo_full_name)) {
        return "malformed repo_full_name: " + rec.repo_full_name;
    }
    if (rec.pr_number < 1) {
        return "missing or non-positive pr_number";
    }
    rec.pr_key = make_pr_key(rec.repo_full_name, rec.pr_number);

    // GitHub semantics: a merged_at timestamp is the definition of merged.
    // REST-style exports report merged PRs as "closed", so that combination
    // is normalized silently; an *open* PR with closure evidence is flagged.
    if (rec.merged_at.has_value() && rec.state != pr_state::merged) {
        if (rec.state == pr_state::open) {
            rec.inconsistent = true;
        }
        rec.state = pr_state::merged;
    }
    if (rec.state == pr_state::open && rec.closed_at.has_value()) {
        rec.inconsistent = true;
    }
    return std::nullopt;
}

corpus_load_result load_csv(const std::filesystem::path& path) {
    corpus_load_result result;
    auto rows = csv_parse(read_file_bytes(path.string()));
    if (rows.empty()) {
        throw std::runtime_error("corpus file has no header row: " + path.string());
    }

    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        col[to_lower(trim(rows[0][i]))] = i;
    }
    if (!col.count("repo_full_name") || !col.count("pr_number")) {
        throw std::runtime_error("corpus header must include repo_full_name and pr_number");
    }
    auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= row.size()) {
            return {};
        }
        return row[it->second];
    };

    std::unordered_set<std::string> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) {
            continue;
        }
        pull_request_record rec;
        rec.repo_full_name = std::string(trim(cell(row, "repo_full_name")));
        if (auto num = parse_pr_number(cell(row, "pr_number"))) {
            rec.pr_number = *num;
        }
        rec.agent = std::string(trim(cell(row, "agent")));
        rec.state = pr_state_from_string(cell(row, "state"));
        rec.created_at = parse_timestamp(cell(row, "created_at"));
        rec.closed_at = parse_timestamp(cell(row, "closed_at"));
        rec.merged_at = parse_timestamp(cell(row, "merged_at"));
        auto additions = col.count("additions") ? parse_count(cell(row, "additions")) : std::nullopt;
        auto deletions = col.count("deletions") ? parse_count(cell(row, "deletions")) : std::nullopt;
        rec.churn_known = additions.has_value() || deletions.has_value();
        rec.additions = additions.value_or(0);
        rec.deletions = deletions.value_or(0);

        if (auto reason = finish_record(rec)) {
            result.issues.push_back({r, *reason});
            continue;
        }
        if (!seen.insert(rec.pr_key).second) {
            result.issues.push_back({r, "duplicate pr_key " + rec.pr_key + ", keeping first"});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::optional<std::int64_t> json_int(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    const auto& v = j[key];
    if (v.is_number_integer()) {
        return v.get<std::int64_t>();
    }
    if (v.is_number()) {
        return static_cast<std::int64_t>(v.get<double>());
    }
    if (v.is_string()) {
        return parse_pr_number(v.get<std::string>());
    }
    return std::nullopt;
}

std::optional<std::int64_t> json_timestamp(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    const auto& v = j[key];
    if (v.is_number_integer()) {
        return v.get<std::int64_t>();
    }
    if (v.is_string()) {
        return parse_timestamp(v.get<std::string>());
    }
    return std::nullopt;
}

corpus_load_result load_jsonl(const std::filesystem::path& path) {
    corpus_load_result result;
    auto lines = split_lines(read_file_bytes(path.string()));
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::size_t row_no = i + 1;
        if (trim(lines[i]).empty()) {
            continue;
        }
        json j = json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            result.issues.push_back({row_no, "unparseable JSON object"});
            continue;
        }
        pull_request_record rec;
        if (j.contains("repo_full_name") && j["repo_full_name"].is_string()) {
            rec.repo_full_name = std::string(trim(j["repo_full_name"].get<std::string>()));
        }
        rec.pr_number = json_int(j, "pr_number").value_or(0);
        if (j.contains("agent") && j["agent"].is_string()) {
            rec.agent = std::string(trim(j["agent"].get<std::string>()));
        }
        if (j.contains("state") && j["state"].is_string()) {
            rec.state = pr_state_from_string(j["state"].get<std::string>());
        }
        rec.created_at = json_timestamp(j, "created_at");
        rec.closed_at = json_timestamp(j, "closed_at");
        rec.merged_at = json_timestamp(j, "merged_at");
        auto additions = json_int(j, "additions");
        auto deletions = json_int(j, "deletions");
        rec.churn_known = additions.has_value() || deletions.has_value();
        rec.additions = std::max<std::int64_t>(0, additions.value_or(0));
        rec.deletions = std::max<std::int64_t>(0, deletions.value_or(0));

        if (auto reason = finish_record(rec)) {
            result.issues.push_back({row_no, *reason});
            continue;
        }
        if (!seen.insert(rec.pr_key).second) {
            result.issues.push_back({row_no, "duplicate pr_key " + rec.pr_key + ", keeping first"});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

}  // namespace

std::string to_string(pr_state state) {
    switch (state) {
        case pr_state::open: return "open";
        case pr_state::closed: return "closed";
        case pr_state::merged: return "merged";
        case pr_state::unknown: return "unknown";
    }
    return "unknown";
}

pr_state pr_state_from_string(std::string_view text) {
    auto t = trim(text);
    if (iequals(t, "open")) {
        return pr_state::open;
    }
    if (iequals(t, "closed")) {
        return pr_state::closed;
    }
    if (iequals(t, "merged")) {
        return pr_state::merged;
    }
    return pr_state::unknown;
}

corpus_load_result load_corpus(const std::filesystem::path& path, corpus_format format) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("corpus file does not exist: " + path.string());
    }
    return format == corpus_format::csv ? load_csv(path) : load_jsonl(path);
}

std::string make_pr_key(const std::string& repo_full_name, std::int64_t pr_number) {
    if (!valid_repo_name(repo_full_name)) {
        throw std::invalid_argument("malformed repo name: " + repo_full_name);
    }
    if (pr_number < 1) {
        throw std::invalid_argument("pr_number must be >= 1, got " + std::to_string(pr_number));
    }
    return repo_full_name + "#" + std::to_string(pr_number);
}

std::pair<std::string, std::int64_t> split_pr_key(const std::string& pr_key) {
    auto hash = pr_key.rfind('#');
    if (hash == std::string::npos || hash + 1 == pr_key.size()) {
        throw std::invalid_argument("malformed pr_key: " + pr_key);
    }
    auto number = parse_pr_number(pr_key.substr(hash + 1));
    if (!number) {
        throw std::invalid_argument("malformed pr_key number: " + pr_key);
    }
    return {pr_key.substr(0, hash), *number};
}

filter_result filter_candidates(std::span<const pull_request_record> records) {
    filter_result result;
    for (const auto& rec : records) {
        switch (rec.state) {
            case pr_state::open:
                result.retained.push_back({rec, false});
                break;
            case pr_state::closed:
                if (rec.merged_at.has_value()) {
                    result.excluded.push_back({rec, "merged"});
                } else {
                    result.retained.push_back({rec, false});
                }
                break;
            case pr_state::merged:
                result.excluded.push_back({rec, "merged"});
                break;
            case pr_state::unknown:
                result.retained.push_back({rec, true});
                break;
        }
    }
    return result;
}

}  // namespace mergemine

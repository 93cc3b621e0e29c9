#include "mergemine/github_client.hpp"

#include "mergemine/text_util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <thread>

namespace mergemine {

namespace {

using nlohmann::json;

constexpr const char* pr_query =
    "query($owner:String!,$name:String!,$number:Int!){"
    "repository(owner:$owner,name:$name){"
    "stargazerCount forkCount isArchived isFork primaryLanguage{name}"
    "pullRequest(number:$number){"
    "state createdAt closedAt mergedAt baseRefName headRefName baseRefOid headRefOid mergeable"
    "}}}";

std::optional<std::string> json_str(const json& j, const char* key) {
    if (j.contains(key) && j[key].is_string()) {
        return j[key].get<std::string>();
    }
    return std::nullopt;
}

// 200-body interpretation. GraphQL reports missing repositories/PRs as
// data nulls or a NOT_FOUND error entry rather than an HTTP 404.
struct parsed_response {
    fetch_code code = fetch_code::ok;
    std::optional<pr_metadata> metadata;
    std::optional<repository_record> repository;
};

parsed_response parse_graphql_body(const std::string& pr_key, const std::string& body) {
    parsed_response out;
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        out.code = fetch_code::server_error;
        return out;
    }
    if (j.contains("errors") && j["errors"].is_array()) {
        for (const auto& err : j["errors"]) {
            if (err.value("type", "") == "NOT_FOUND") {
                out.code = fetch_code::not_found;
                return out;
            }
        }
        if (!j.contains("data") || j["data"].is_null()) {
            out.code = fetch_code::server_error;
            return out;
        }
    }
    if (!j.contains("data") || !j["data"].is_object() || j["data"]["repository"].is_null()) {
        out.code = fetch_code::not_found;
        return out;
    }
    const auto& repo = j["data"]["repository"];

    repository_record repo_rec;
    repo_rec.repo_full_name = split_pr_key(pr_key).first;
    repo_rec.stars = repo.value("stargazerCount", std::int64_t{0});
    repo_rec.forks = repo.value("forkCount", std::int64_t{0});
    repo_rec.is_archived = repo.value("isArchived", false);
    repo_rec.is_fork = repo.value("isFork", false);
    if (repo.contains("primaryLanguage") && repo["primaryLanguage"].is_object()) {
        repo_rec.primary_language = json_str(repo["primaryLanguage"], "name");
    }
    out.repository = repo_rec;

    if (!repo.contains("pullRequest") || repo["pullRequest"].is_null()) {
        out.code = fetch_code::not_found;
        return out;
    }
    const auto& pr = repo["pullRequest"];

    pr_metadata meta;
    meta.pr_key = pr_key;
    auto state = to_lower(json_str(pr, "state").value_or(""));
    if (state == "open") {
        meta.state = pr_state::open;
    } else if (state == "closed") {
        meta.state = pr_state::closed;
    } else if (state == "merged") {
        meta.state = pr_state::merged;
    } else {
        out.code = fetch_code::server_error;
        return out;
    }
    if (auto ts = json_str(pr, "createdAt")) meta.created_at = parse_timestamp(*ts);
    if (auto ts = json_str(pr, "closedAt")) meta.closed_at = parse_timestamp(*ts);
    if (auto ts = json_str(pr, "mergedAt")) meta.merged_at = parse_timestamp(*ts);
    meta.base_ref_name = json_str(pr, "baseRefName").value_or("");
    meta.head_ref_name = json_str(pr, "headRefName").value_or("");
    meta.base_ref_oid = to_lower(json_str(pr, "baseRefOid").value_or(""));
    meta.head_ref_oid = to_lower(json_str(pr, "headRefOid").value_or(""));
    auto signal = to_lower(json_str(pr, "mergeable").value_or("unknown"));
    meta.mergeable = mergeable_state_from_string(signal);

    // A PR without resolvable anchors cannot be simulated; the reference
    // is permanently missing from the API's point of view.
    if (!is_hex40(meta.base_ref_oid) || !is_hex40(meta.head_ref_oid)) {
        out.code = fetch_code::gone;
        out.metadata.reset();
        return out;
    }
    if (meta.state == pr_state::merged && !meta.merged_at) {
        meta.merged_at = meta.closed_at;
    }
    out.metadata = std::move(meta);
    out.code = fetch_code::ok;
    return out;
}

}  // namespace

std::string to_string(fetch_code code) {
    switch (code) {
        case fetch_code::ok: return "OK";
        case fetch_code::rate_limited: return "RATE_LIMITED";
        case fetch_code::not_found: return "NOT_FOUND";
        case fetch_code::gone: return "GONE";
        case fetch_code::legal_block: return "LEGAL_BLOCK";
        case fetch_code::server_error: return "SERVER_ERROR";
        case fetch_code::auth_failed: return "AUTH_FAILED";
        case fetch_code::exhausted_retries: return "EXHAUSTED_RETRIES";
    }
    return "SERVER_ERROR";
}

std::chrono::milliseconds backoff_delay(int attempt, const retry_policy& policy) {
    if (attempt < 1 || attempt > policy.max_attempts) {
        throw std::out_of_range("backoff_delay: attempt " + std::to_string(attempt) +
                                " outside [1, " + std::to_string(policy.max_attempts) + "]");
    }
    double scaled = static_cast<double>(policy.base_delay.count()) *
                    std::pow(policy.factor, attempt - 1);
    auto capped = std::min(scaled, static_cast<double>(policy.max_delay.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

// --- token pool -------------------------------------------------------------

token_pool::token_pool(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)), cooling_until_(tokens_.size(), 0) {}

std::variant<std::string, token_pool::wait_until> token_pool::next(std::int64_t now) {
    std::lock_guard lock(mutex_);
    if (tokens_.empty()) {
        throw std::runtime_error("token pool is empty");
    }
    for (std::size_t probe = 0; probe < tokens_.size(); ++probe) {
        auto idx = cursor_ % tokens_.size();
        cursor_ = (cursor_ + 1) % tokens_.size();
        if (cooling_until_[idx] <= now) {
            return tokens_[idx];
        }
    }
    auto earliest = cooling_until_[0];
    for (auto until : cooling_until_) {
        earliest = std::min(earliest, until);
    }
    return wait_until{earliest};
}

void token_pool::mark_rate_limited(const std::string& token, std::int64_t reset_at) {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] == token) {
            cooling_until_[i] = std::max(cooling_until_[i], reset_at);
        }
    }
}

std::vector<std::string> token_pool::parse_env(std::string_view csv) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        auto comma = csv.find(',', pos);
        auto piece = comma == std::string_view::npos ? csv.substr(pos)
                                                     : csv.substr(pos, comma - pos);
        auto t = trim(piece);
        if (!t.empty()) {
            tokens.emplace_back(t);
        }
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return tokens;
}

// --- client -----------------------------------------------------------------

std::string build_pr_query_body(const std::string& owner, const std::string& name,
                                std::int64_t number) {
    json j;
    j["query"] = pr_query;
    j["variables"] = {{"owner", owner}, {"name", name}, {"number", number}};
    return j.dump();
}

github_client::github_client(std::shared_ptr<http_transport> transport, token_pool& pool,
                             github_client_options options)
    : transport_(std::move(transport)), pool_(pool), options_(std::move(options)) {
    if (!options_.sleep) {
        options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

fetch_result github_client::fetch_pr_metadata(const std::string& pr_key) {
    auto [repo_full_name, number] = split_pr_key(pr_key);
    auto slash = repo_full_name.find('/');
    auto owner = repo_full_name.substr(0, slash);
    auto name = repo_full_name.substr(slash + 1);
    auto body = build_pr_query_body(owner, name, number);

    fetch_result result;
    std::optional<int> last_status;

    for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
        // Acquire a token; if every token is cooling down, wait out the
        // earliest reset horizon instead of spinning.
        std::string token;
        for (;;) {
            auto slot = pool_.next(options_.now());
            if (std::holds_alternative<std::string>(slot)) {
                token = std::get<std::string>(slot);
                break;
            }
            auto resume_at = std::get<token_pool::wait_until>(slot).resume_at;
            auto wait_s = std::max<std::int64_t>(1, resume_at - options_.now());
            options_.sleep(std::chrono::seconds(wait_s));
        }

        http_response response;
        bool transport_failed = false;
        try {
            response = transport_->post({options_.api_url, token, body});
        } catch (const std::exception&) {
            transport_failed = true;
        }

        result.status.attempts = attempt;
        if (!transport_failed) {
            last_status = response.status;
        }

        if (!transport_failed && response.status == 200) {
            auto parsed = parse_graphql_body(pr_key, response.body);
            if (parsed.code == fetch_code::ok) {
                result.status.code = fetch_code::ok;
                result.status.http_status = 200;
                result.metadata = std::move(parsed.metadata);
                result.repository = std::move(parsed.repository);
                return result;
            }
            if (parsed.code != fetch_code::server_error) {
                result.status.code = parsed.code;
                result.status.http_status = 200;
                result.repository = std::move(parsed.repository);
                return result;
            }
            // Malformed 200 body: treat like a transient server fault.
        }

        int status = transport_failed ? 0 : response.status;
        bool retriable = transport_failed || status == 200 || status == 403 || status >= 500;
        if (!retriable) {
            switch (status) {
                case 401: result.status.code = fetch_code::auth_failed; break;
                case 404: result.status.code = fetch_code::not_found; break;
                case 410: result.status.code = fetch_code::gone; break;
                case 451: result.status.code = fetch_code::legal_block; break;
                default: result.status.code = fetch_code::server_error; break;
            }
            result.status.http_status = last_status;
            return result;
        }

        if (status == 403) {
            std::int64_t reset_at = options_.now() + 60;
            auto it = response.headers.find("x-ratelimit-reset");
            if (it != response.headers.end()) {
                if (auto parsed_reset = parse_timestamp(it->second)) {
                    reset_at = *parsed_reset;
                }
            }
            pool_.mark_rate_limited(token, reset_at);
        }

        if (attempt == options_.retry.max_attempts) {
            break;
        }
        options_.sleep(backoff_delay(attempt, options_.retry));
    }

    // Retries consumed. A classifiable last status keeps its mapped code
    // (persistent 403 surfaces as RATE_LIMITED, persistent 5xx as
    // SERVER_ERROR); EXHAUSTED_RETRIES is reserved for runs that never got
    // an HTTP status at all.
    if (last_status == 403) {
        result.status.code = fetch_code::rate_limited;
    } else if (last_status && *last_status >= 500) {
        result.status.code = fetch_code::server_error;
    } else {
        result.status.code = fetch_code::exhausted_retries;
    }
    result.status.http_status = last_status;
    result.status.attempts = options_.retry.max_attempts;
    return result;
}

// --- httplib transport --------------------------------------------------

namespace {

class httplib_transport : public http_transport {
  public:
    http_response post(const http_request& request) override {
        auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos) {
            throw std::runtime_error("invalid API url: " + request.url);
        }
        auto path_start = request.url.find('/', scheme_end + 3);
        std::string origin = path_start == std::string::npos ? request.url
                                                             : request.url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/"
                                                           : request.url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(30);
        client.set_read_timeout(60);
        httplib::Headers headers = {
            {"Authorization", "Bearer " + request.bearer_token},
            {"User-Agent", "mergemine"},
        };
        auto res = client.Post(path, headers, request.body, "application/json");
        if (!res) {
            throw std::runtime_error("transport failure: " + httplib::to_string(res.error()));
        }
        http_response out;
        out.status = res->status;
        out.body = res->body;
        for (const auto& [key, value] : res->headers) {
            out.headers[to_lower(key)] = value;
        }
        return out;
    }
};

}  // namespace

std::shared_ptr<http_transport> make_httplib_transport() {
    return std::make_shared<httplib_transport>();
}

}  // namespace mergemine

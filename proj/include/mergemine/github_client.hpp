#pragma once

#include "mergemine/corpus.hpp"
#include "mergemine/dataset.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mergemine {

enum class fetch_code {
    ok,
    rate_limited,
    not_found,
    gone,
    legal_block,
    server_error,
    auth_failed,
    exhausted_retries,
};

std::string to_string(fetch_code code);

struct fetch_status {
    fetch_code code = fetch_code::server_error;
    std::optional<int> http_status;
    int attempts = 0;
};

// GitHub-derived anchors for one PR simulation.
struct pr_metadata {
    std::string pr_key;
    pr_state state = pr_state::open;
    std::optional<std::int64_t> created_at;
    std::optional<std::int64_t> closed_at;
    std::optional<std::int64_t> merged_at;
    std::string base_ref_name;
    std::string head_ref_name;
    std::string base_ref_oid;  // 40-hex
    std::string head_ref_oid;  // 40-hex
    mergeable_state mergeable = mergeable_state::unknown;
};

struct fetch_result {
    fetch_status status;
    std::optional<pr_metadata> metadata;        // present iff status.code == ok
    std::optional<repository_record> repository;
};

struct retry_policy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{2000};
    double factor = 2.0;
    std::chrono::milliseconds max_delay{60000};
};

// base * factor^(attempt-1), saturated at max_delay. Attempts outside
// [1, max_attempts] throw std::out_of_range before any computation.
std::chrono::milliseconds backoff_delay(int attempt, const retry_policy& policy);

struct http_request {
    std::string url;
    std::string bearer_token;
    std::string body;  // JSON
};

struct http_response {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // lowercase keys
};

// Transport seam: production uses cpp-httplib, tests script transcripts.
class http_transport {
  public:
    virtual ~http_transport() = default;
    // Throws std::runtime_error on connection-level failure.
    virtual http_response post(const http_request& request) = 0;
};

std::shared_ptr<http_transport> make_httplib_transport();

// Round-robin pool. A token observed rate-limited is skipped until its
// reset horizon passes; when every token is cooling down the caller gets
// the earliest resume time instead of busy-waiting.
class token_pool {
  public:
    explicit token_pool(std::vector<std::string> tokens);

    struct wait_until {
        std::int64_t resume_at = 0;  // epoch seconds
    };

    std::variant<std::string, wait_until> next(std::int64_t now);
    void mark_rate_limited(const std::string& token, std::int64_t reset_at);
    std::size_t size() const { return tokens_.size(); }

    static std::vector<std::string> parse_env(std::string_view csv);

  private:
    std::vector<std::string> tokens_;
    std::vector<std::int64_t> cooling_until_;
    std::size_t cursor_ = 0;
    mutable std::mutex mutex_;
};

struct github_client_options {
    std::string api_url = "https://api.github.com/graphql";
    retry_policy retry;
    // Injectable clock/sleep so transcript tests run on simulated time.
    std::function<std::int64_t()> now = [] {
        return static_cast<std::int64_t>(::time(nullptr));
    };
    std::function<void(std::chrono::milliseconds)> sleep;
};

// Thread-safe: the token pool serializes internally and the transport is
// expected to be shareable.
class github_client {
  public:
    github_client(std::shared_ptr<http_transport> transport, token_pool& pool,
                  github_client_options options);

    // Maps HTTP classes onto the status taxonomy: 403 -> RATE_LIMITED and
    // 5xx -> SERVER_ERROR (both retried up to the policy bound, then
    // EXHAUSTED_RETRIES); 404 -> NOT_FOUND, 410 -> GONE, 451 ->
    // LEGAL_BLOCK, 401 -> AUTH_FAILED (terminal).
    fetch_result fetch_pr_metadata(const std::string& pr_key);

  private:
    std::shared_ptr<http_transport> transport_;
    token_pool& pool_;
    github_client_options options_;
};

std::string build_pr_query_body(const std::string& owner, const std::string& name,
                                std::int64_t number);

}  // namespace mergemine

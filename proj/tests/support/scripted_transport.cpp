#include "support/scripted_transport.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace mergemine::testing {

using nlohmann::json;

http_response scripted_transport::post(const http_request& request) {
    std::lock_guard lock(mutex_);
    requests.push_back(request);
    if (cursor_ >= script.size()) {
        throw std::runtime_error("scripted_transport: script exhausted after " +
                                 std::to_string(script.size()) + " responses");
    }
    auto response = script[cursor_++];
    if (response.status < 0) {
        throw std::runtime_error("scripted_transport: connection failure");
    }
    return response;
}

std::string graphql_pr_body(const fake_pr_options& options) {
    json pr;
    pr["state"] = options.state;
    pr["createdAt"] = options.created_at;
    pr["closedAt"] = options.closed_at.empty() ? json(nullptr) : json(options.closed_at);
    pr["mergedAt"] = options.merged_at.empty() ? json(nullptr) : json(options.merged_at);
    pr["baseRefName"] = options.base_ref_name;
    pr["headRefName"] = options.head_ref_name;
    pr["baseRefOid"] = options.base_ref_oid;
    pr["headRefOid"] = options.head_ref_oid;
    pr["mergeable"] = options.mergeable;

    json repo;
    repo["stargazerCount"] = options.stars;
    repo["forkCount"] = options.forks;
    repo["isArchived"] = false;
    repo["isFork"] = false;
    repo["primaryLanguage"] = {{"name", options.primary_language}};
    repo["pullRequest"] = pr;

    json body;
    body["data"] = {{"repository", repo}};
    return body.dump();
}

std::string graphql_missing_repo_body() {
    json body;
    body["data"] = {{"repository", nullptr}};
    return body.dump();
}

std::string graphql_not_found_error_body() {
    json body;
    body["data"] = nullptr;
    body["errors"] = json::array({{{"type", "NOT_FOUND"}, {"message", "Could not resolve"}}});
    return body.dump();
}

std::string fake_oid(char fill) {
    return std::string(40, fill);
}

}  // namespace mergemine::testing

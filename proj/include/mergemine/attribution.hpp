#pragma once

#include "mergemine/dataset.hpp"
#include "mergemine/repo_cache.hpp"

#include <optional>
#include <string>

namespace mergemine {

// Most recent commit reachable from rev that modified path; nullopt when
// the path never existed there. Rename following is off, matching plain
// path filtering. Throws repo_cache_error{commit_unreachable} when rev
// does not resolve.
std::optional<std::string> last_touch(repo_cache& cache, const repo_handle& handle,
                                      const std::string& rev, const std::string& path);

// Per-file attribution for one PR: head side against head_oid, base side
// against the commit the merge was actually simulated from.
conflict_file_commit attribute_file(repo_cache& cache, const repo_handle& handle,
                                    const std::string& pr_key, const std::string& file_path,
                                    const std::string& head_oid,
                                    const std::string& simulated_base_oid);

}  // namespace mergemine

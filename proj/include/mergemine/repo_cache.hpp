#pragma once

#include "mergemine/subprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace mergemine {

enum class repo_error_code { clone_failed, corrupt_cache, commit_unreachable };

std::string to_string(repo_error_code code);

class repo_cache_error : public std::runtime_error {
  public:
    repo_cache_error(repo_error_code code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    repo_error_code code() const { return code_; }

  private:
    repo_error_code code_;
};

struct repo_handle {
    std::string repo_full_name;
    std::filesystem::path local_path;
    std::int64_t last_fetch_at = 0;
};

struct repo_cache_options {
    std::filesystem::path cache_root;
    // Clone URL prefix; repo URLs are <remote_base><owner>/<repo>.git. A
    // file:// prefix makes the whole pipeline runnable against local
    // fixtures.
    std::string remote_base = "https://github.com/";
    bool offline = false;  // fail instead of cloning or fetching
};

// Minimum version with stable partial-clone support.
inline constexpr int git_min_major = 2;
inline constexpr int git_min_minor = 25;

// Throws std::runtime_error when git is missing or older than the pinned
// minimum.
void check_git_version();

// Holds an exclusive advisory lock on <cache_root>/<name>.lock plus the
// in-process mutex; all worktree-mutating operations for one repository go
// through one of these at a time.
class repo_lock {
  public:
    repo_lock(const std::filesystem::path& lock_path, std::mutex& mutex);
    ~repo_lock();
    repo_lock(const repo_lock&) = delete;
    repo_lock& operator=(const repo_lock&) = delete;

  private:
    int fd_ = -1;
    std::unique_lock<std::mutex> guard_;
};

class repo_cache {
  public:
    explicit repo_cache(repo_cache_options options);

    // First call clones (blobless partial clone, plain clone as fallback);
    // later calls fetch. A cache directory that fails the health check is
    // evicted and re-cloned once.
    repo_handle ensure_repo(const std::string& repo_full_name);

    // Leaves the worktree exactly at base_oid: detached HEAD, empty
    // status, no merge residue, untracked files removed. Fetches the OID
    // explicitly when it is not yet local.
    void prepare_worktree(const repo_handle& handle, const std::string& base_oid);

    // True when oid resolves to a commit, fetching it by OID if needed.
    bool resolve_commit(const repo_handle& handle, const std::string& oid);

    std::unique_ptr<repo_lock> lock_repo(const std::string& repo_full_name);

    // Runs git inside the handle's worktree, recording the invocation
    // through the audit hook.
    command_result git(const repo_handle& handle, const std::vector<std::string>& args) const;

    // Verbatim command lines plus exit codes, for the run log.
    void set_audit_hook(std::function<void(const std::string&)> hook) { audit_ = std::move(hook); }

    std::filesystem::path repo_dir(const std::string& repo_full_name) const;
    const repo_cache_options& options() const { return options_; }

  private:
    command_result git_in(const std::filesystem::path& dir,
                          const std::vector<std::string>& args) const;
    bool healthy(const std::filesystem::path& dir, bool deep = false) const;
    void clone_repo(const std::string& repo_full_name, const std::filesystem::path& dir);

    repo_cache_options options_;
    std::function<void(const std::string&)> audit_;
    std::map<std::string, std::mutex> repo_mutexes_;
    std::mutex map_mutex_;
};

}  // namespace mergemine

#include "mergemine/repo_cache.hpp"

#include "mergemine/text_util.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <ctime>

namespace fs = std::filesystem;

namespace mergemine {

std::string to_string(repo_error_code code) {
    switch (code) {
        case repo_error_code::clone_failed: return "CLONE_FAILED";
        case repo_error_code::corrupt_cache: return "CORRUPT_CACHE";
        case repo_error_code::commit_unreachable: return "COMMIT_UNREACHABLE";
    }
    return "CLONE_FAILED";
}

void check_git_version() {
    auto result = run_command({"git", "--version"});
    if (!result.ok()) {
        throw std::runtime_error("git is not available on PATH");
    }
    int major = 0, minor = 0;
    if (std::sscanf(result.out.c_str(), "git version %d.%d", &major, &minor) != 2) {
        throw std::runtime_error("cannot parse git version from: " + result.out);
    }
    if (major < git_min_major || (major == git_min_major && minor < git_min_minor)) {
        throw std::runtime_error("git " + std::to_string(git_min_major) + "." +
                                 std::to_string(git_min_minor) + "+ required, found " +
                                 std::string(trim(result.out)));
    }
}

repo_lock::repo_lock(const fs::path& lock_path, std::mutex& mutex) : guard_(mutex) {
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_EX);
    }
}

repo_lock::~repo_lock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

repo_cache::repo_cache(repo_cache_options options) : options_(std::move(options)) {
    fs::create_directories(options_.cache_root);
}

fs::path repo_cache::repo_dir(const std::string& repo_full_name) const {
    // owner/repository -> owner__repository; avoids nested cache paths.
    std::string dir = repo_full_name;
    auto slash = dir.find('/');
    if (slash != std::string::npos) {
        dir.replace(slash, 1, "__");
    }
    return options_.cache_root / dir;
}

std::unique_ptr<repo_lock> repo_cache::lock_repo(const std::string& repo_full_name) {
    std::mutex* m = nullptr;
    {
        std::lock_guard lock(map_mutex_);
        m = &repo_mutexes_[repo_full_name];
    }
    auto lock_path = repo_dir(repo_full_name);
    lock_path += ".lock";
    return std::make_unique<repo_lock>(lock_path, *m);
}

command_result repo_cache::git_in(const fs::path& dir,
                                  const std::vector<std::string>& args) const {
    std::vector<std::string> argv = {"git", "-C", dir.string()};
    argv.insert(argv.end(), args.begin(), args.end());
    auto result = run_command(argv);
    if (audit_) {
        audit_(render_command_line(argv) + " -> " + std::to_string(result.exit_code));
    }
    return result;
}

command_result repo_cache::git(const repo_handle& handle,
                               const std::vector<std::string>& args) const {
    return git_in(handle.local_path, args);
}

bool repo_cache::healthy(const fs::path& dir, bool deep) const {
    if (!fs::exists(dir / ".git")) {
        return false;
    }
    if (!git_in(dir, {"rev-parse", "--git-dir"}).ok()) {
        return false;
    }
    if (!git_in(dir, {"status", "--porcelain"}).ok()) {
        return false;
    }
    if (!git_in(dir, {"rev-parse", "--verify", "-q", "HEAD^{commit}"}).ok()) {
        return false;
    }
    // Cheap probes miss truncated packs in partial clones (missing objects
    // get lazily refetched); a connectivity fsck does not.
    if (deep && !git_in(dir, {"fsck", "--no-progress", "--connectivity-only"}).ok()) {
        return false;
    }
    return true;
}

void repo_cache::clone_repo(const std::string& repo_full_name, const fs::path& dir) {
    if (options_.offline) {
        throw repo_cache_error(repo_error_code::clone_failed,
                               "offline mode: repository not in cache: " + repo_full_name);
    }
    auto url = options_.remote_base + repo_full_name + ".git";
    std::vector<std::string> clone = {"git",  "clone", "--quiet", "--filter=blob:none",
                                      url,    dir.string()};
    auto result = run_command(clone);
    if (audit_) {
        audit_(render_command_line(clone) + " -> " + std::to_string(result.exit_code));
    }
    if (!result.ok()) {
        // Some servers refuse filters; a full clone is still correct,
        // just heavier.
        std::error_code ec;
        fs::remove_all(dir, ec);
        std::vector<std::string> plain = {"git", "clone", "--quiet", url, dir.string()};
        result = run_command(plain);
        if (audit_) {
            audit_(render_command_line(plain) + " -> " + std::to_string(result.exit_code));
        }
    }
    if (!result.ok()) {
        std::error_code ec;
        fs::remove_all(dir, ec);
        throw repo_cache_error(repo_error_code::clone_failed, "clone failed for " +
                                                                  repo_full_name + ": " +
                                                                  std::string(trim(result.err)));
    }
}

repo_handle repo_cache::ensure_repo(const std::string& repo_full_name) {
    auto dir = repo_dir(repo_full_name);
    repo_handle handle{repo_full_name, dir, 0};

    // git refuses to prepare merges without a committer identity; pin one
    // locally so simulations never depend on host configuration.
    auto ensure_identity = [&] {
        git_in(dir, {"config", "user.name", "merge-simulator"});
        git_in(dir, {"config", "user.email", "merge-simulator@localhost"});
        git_in(dir, {"config", "commit.gpgsign", "false"});
    };

    if (fs::exists(dir)) {
        if (!healthy(dir, /*deep=*/true)) {
            std::error_code ec;
            fs::remove_all(dir, ec);
            clone_repo(repo_full_name, dir);
            if (!healthy(dir)) {
                throw repo_cache_error(repo_error_code::corrupt_cache,
                                       "cache unhealthy after re-clone: " + repo_full_name);
            }
            ensure_identity();
            handle.last_fetch_at = static_cast<std::int64_t>(::time(nullptr));
            return handle;
        }
        if (!options_.offline) {
            auto fetch = git_in(dir, {"fetch", "--quiet", "origin", "--prune"});
            if (fetch.ok()) {
                handle.last_fetch_at = static_cast<std::int64_t>(::time(nullptr));
            }
            // A failed fetch leaves a usable snapshot; unresolved commits
            // surface later as COMMIT_UNREACHABLE.
        }
        ensure_identity();
        return handle;
    }

    clone_repo(repo_full_name, dir);
    if (!healthy(dir)) {
        throw repo_cache_error(repo_error_code::corrupt_cache,
                               "fresh clone failed health check: " + repo_full_name);
    }
    ensure_identity();
    handle.last_fetch_at = static_cast<std::int64_t>(::time(nullptr));
    return handle;
}

bool repo_cache::resolve_commit(const repo_handle& handle, const std::string& oid) {
    if (git(handle, {"rev-parse", "--verify", "-q", oid + "^{commit}"}).ok()) {
        return true;
    }
    if (options_.offline) {
        return false;
    }
    git(handle, {"fetch", "--quiet", "origin", oid});
    return git(handle, {"rev-parse", "--verify", "-q", oid + "^{commit}"}).ok();
}

void repo_cache::prepare_worktree(const repo_handle& handle, const std::string& base_oid) {
    if (!resolve_commit(handle, base_oid)) {
        throw repo_cache_error(repo_error_code::commit_unreachable,
                               "cannot resolve base commit " + base_oid + " in " +
                                   handle.repo_full_name);
    }
    if (git(handle, {"rev-parse", "--verify", "-q", "MERGE_HEAD"}).ok()) {
        git(handle, {"merge", "--abort"});
    }
    if (!git(handle, {"checkout", "--quiet", "--force", "--detach", base_oid}).ok()) {
        throw repo_cache_error(repo_error_code::corrupt_cache,
                               "checkout failed for " + base_oid + " in " + handle.repo_full_name);
    }
    git(handle, {"reset", "--hard", "--quiet", base_oid});
    git(handle, {"clean", "-ffdx", "--quiet"});

    auto status = git(handle, {"status", "--porcelain"});
    if (!status.ok() || !trim(status.out).empty()) {
        throw repo_cache_error(repo_error_code::corrupt_cache,
                               "worktree not clean after preparation in " +
                                   handle.repo_full_name);
    }
}

}  // namespace mergemine

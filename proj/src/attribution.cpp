#include "mergemine/attribution.hpp"

#include "mergemine/text_util.hpp"

namespace mergemine {

std::optional<std::string> last_touch(repo_cache& cache, const repo_handle& handle,
                                      const std::string& rev, const std::string& path) {
    if (!cache.resolve_commit(handle, rev)) {
        throw repo_cache_error(repo_error_code::commit_unreachable,
                               "rev unreachable in last_touch: " + rev);
    }
    auto result = cache.git(handle, {"log", "-n", "1", "--format=%H", rev, "--", path});
    if (!result.ok()) {
        return std::nullopt;
    }
    auto oid = std::string(trim(result.out));
    if (!is_hex40(oid)) {
        return std::nullopt;
    }
    return oid;
}

conflict_file_commit attribute_file(repo_cache& cache, const repo_handle& handle,
                                    const std::string& pr_key, const std::string& file_path,
                                    const std::string& head_oid,
                                    const std::string& simulated_base_oid) {
    conflict_file_commit out;
    out.pr_key = pr_key;
    out.file_path = file_path;
    out.head_last_touch_oid = last_touch(cache, handle, head_oid, file_path);
    out.base_last_touch_oid = last_touch(cache, handle, simulated_base_oid, file_path);
    return out;
}

}  // namespace mergemine

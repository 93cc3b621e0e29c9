#include "mergemine/conflict.hpp"

#include <omp.h>

namespace mergemine {

// Files are independent, so the scan is a flat parallel loop writing into
// pre-sized slots. Output order matches the serial kernel exactly.
std::vector<file_scan_output> scan_files_parallel(const std::string& pr_key,
                                                  std::span<const file_scan_input> inputs,
                                                  int preview_lines) {
    std::vector<file_scan_output> outputs(inputs.size());
    const auto n = static_cast<std::int64_t>(inputs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        outputs[static_cast<std::size_t>(i)] =
            scan_one_file(pr_key, inputs[static_cast<std::size_t>(i)], preview_lines);
    }
    return outputs;
}

}  // namespace mergemine

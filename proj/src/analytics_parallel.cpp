#include "mergemine/analytics.hpp"

#include <omp.h>

#include <vector>

namespace mergemine {

// Per-thread tallies over disjoint row chunks, merged in thread order.
// Counts and sums are order-insensitive; the value vectors feeding medians
// and histograms get sorted or bucketed downstream, so the merge order
// only has to be deterministic, which thread-index order is.
tally_map tally_rows_parallel(std::span<const pull_request_row> rows) {
    int threads = 1;
#pragma omp parallel
    {
#pragma omp single
        threads = omp_get_num_threads();
    }

    std::vector<tally_map> partials(static_cast<std::size_t>(threads));
    const auto n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel
    {
        auto& local = partials[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (!row.outcome) {
                continue;
            }
            auto& tally = local[row.agent];
            tally.simulated += 1;
            if (*row.outcome == merge_label::merge_conflict) {
                tally.conflicting += 1;
                tally.files_sum += row.metrics.num_conflict_files;
                tally.regions_sum += row.metrics.num_conflict_regions;
                tally.lines_sum += row.metrics.conflict_lines;
                tally.conflicting_files_values.push_back(row.metrics.num_conflict_files);
                tally.conflicting_lines_values.push_back(row.metrics.conflict_lines);
            }
        }
    }

    tally_map merged;
    for (auto& partial : partials) {
        for (auto& [agent, tally] : partial) {
            auto& into = merged[agent];
            into.simulated += tally.simulated;
            into.conflicting += tally.conflicting;
            into.files_sum += tally.files_sum;
            into.regions_sum += tally.regions_sum;
            into.lines_sum += tally.lines_sum;
            into.conflicting_files_values.insert(into.conflicting_files_values.end(),
                                                 tally.conflicting_files_values.begin(),
                                                 tally.conflicting_files_values.end());
            into.conflicting_lines_values.insert(into.conflicting_lines_values.end(),
                                                 tally.conflicting_lines_values.begin(),
                                                 tally.conflicting_lines_values.end());
        }
    }
    return merged;
}

}  // namespace mergemine

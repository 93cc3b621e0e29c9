#pragma once

#include "mergemine/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mergemine {

struct rate_estimate {
    std::int64_t n = 0;
    std::int64_t k = 0;
    double rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// k/n with a 95% normal-approximation interval (z = 1.96), clamped to
// [0, 1]. Throws std::invalid_argument when n < 1 or k outside [0, n].
rate_estimate conflict_rate(std::int64_t k, std::int64_t n);

struct agent_rate {
    std::string agent;
    rate_estimate estimate;
};

// Denominator per agent: rows that reached simulation (any outcome label,
// merge_error included). Numerator: merge_conflict rows. Sorted by rate
// ascending, agent name as tiebreak.
std::vector<agent_rate> per_agent_stats(std::span<const pull_request_row> rows);

struct severity_row {
    std::string agent;  // "ALL" for the overall row
    std::int64_t n_conflicting = 0;
    double mean_files = 0.0;
    double median_files = 0.0;
    double mean_regions = 0.0;
    double mean_lines = 0.0;
};

struct severity_hist_bin {
    std::string agent;
    std::int64_t lo = 0;  // [lo, hi) with decade bounds; lo 0 catches zero-line PRs
    std::int64_t hi = 1;
    std::int64_t count = 0;
};

struct severity_summary_result {
    std::vector<severity_row> rows;       // per agent plus "ALL"
    std::vector<severity_hist_bin> hist;  // log-scale conflict_lines bins
};

// Only merge_conflict rows contribute; anything else in the stream is
// ignored so the function stays total.
severity_summary_result severity_summary(std::span<const pull_request_row> rows);

struct decile_bin {
    int bin_index = 0;
    std::int64_t churn_min = 0;
    std::int64_t churn_max = 0;
    double median_churn = 0.0;
    std::int64_t n = 0;
    std::int64_t k = 0;
    double rate = 0.0;
};

struct decile_result {
    std::vector<decile_bin> bins;
    std::int64_t excluded_missing_churn = 0;
    bool single_bin_fallback = false;  // fewer than 10 usable rows
};

// Rank-based decile partition of simulated rows by churn = additions +
// deletions, ties broken by pr_key. The n-weighted mean of bin rates
// equals the overall rate by construction.
decile_result churn_deciles(std::span<const pull_request_row> rows);

// --- aggregation kernels ---------------------------------------------------
// Corpus-scale tallies are flat reductions over the row stream; the
// parallel kernel is what the analyze stage runs and the serial one is the
// reference it is tested against.

struct agent_tally {
    std::int64_t simulated = 0;
    std::int64_t conflicting = 0;
    std::int64_t files_sum = 0;
    std::int64_t regions_sum = 0;
    std::int64_t lines_sum = 0;
    std::vector<std::int64_t> conflicting_files_values;  // for medians
    std::vector<std::int64_t> conflicting_lines_values;  // for histograms
};

using tally_map = std::map<std::string, agent_tally>;

tally_map tally_rows_serial(std::span<const pull_request_row> rows);
tally_map tally_rows_parallel(std::span<const pull_request_row> rows);

// --- plot-ready emission -----------------------------------------------

void write_agent_rates_csv(const std::filesystem::path& path,
                           const std::vector<agent_rate>& rates);
void write_severity_hist_csv(const std::filesystem::path& path,
                             const std::vector<severity_hist_bin>& bins);
void write_churn_deciles_csv(const std::filesystem::path& path, const decile_result& deciles);

// Two-decimal percent rendering used by the report tables.
std::string format_percent(double fraction);

}  // namespace mergemine

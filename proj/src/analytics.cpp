#include "mergemine/analytics.hpp"

#include "mergemine/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mergemine {

namespace {

constexpr double z_95 = 1.96;

double median_of_sorted(const std::vector<std::int64_t>& sorted) {
    if (sorted.empty()) {
        return 0.0;
    }
    auto n = sorted.size();
    if (n % 2 == 1) {
        return static_cast<double>(sorted[n / 2]);
    }
    return (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
}

severity_row summarize(const std::string& agent, const agent_tally& tally) {
    severity_row row;
    row.agent = agent;
    row.n_conflicting = tally.conflicting;
    if (tally.conflicting > 0) {
        auto n = static_cast<double>(tally.conflicting);
        row.mean_files = static_cast<double>(tally.files_sum) / n;
        row.mean_regions = static_cast<double>(tally.regions_sum) / n;
        row.mean_lines = static_cast<double>(tally.lines_sum) / n;
        auto values = tally.conflicting_files_values;
        std::sort(values.begin(), values.end());
        row.median_files = median_of_sorted(values);
    }
    return row;
}

// Decade bin index for a conflict_lines value: 0 holds [0,1), i holds
// [10^(i-1), 10^i) for i >= 1.
int decade_bin(std::int64_t lines) {
    if (lines < 1) {
        return 0;
    }
    int bin = 1;
    std::int64_t hi = 10;
    while (lines >= hi && bin < 12) {
        hi *= 10;
        ++bin;
    }
    return bin;
}

std::pair<std::int64_t, std::int64_t> decade_bounds(int bin) {
    if (bin == 0) {
        return {0, 1};
    }
    std::int64_t lo = 1;
    for (int i = 1; i < bin; ++i) {
        lo *= 10;
    }
    return {lo, lo * 10};
}

}  // namespace

rate_estimate conflict_rate(std::int64_t k, std::int64_t n) {
    if (n < 1) {
        throw std::invalid_argument("conflict_rate: n must be >= 1");
    }
    if (k < 0 || k > n) {
        throw std::invalid_argument("conflict_rate: k must lie in [0, n]");
    }
    rate_estimate est;
    est.n = n;
    est.k = k;
    est.rate = static_cast<double>(k) / static_cast<double>(n);
    double half = z_95 * std::sqrt(est.rate * (1.0 - est.rate) / static_cast<double>(n));
    est.ci_low = std::max(0.0, est.rate - half);
    est.ci_high = std::min(1.0, est.rate + half);
    return est;
}

tally_map tally_rows_serial(std::span<const pull_request_row> rows) {
    tally_map tallies;
    for (const auto& row : rows) {
        if (!row.outcome) {
            continue;
        }
        auto& tally = tallies[row.agent];
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
    return tallies;
}

std::vector<agent_rate> per_agent_stats(std::span<const pull_request_row> rows) {
    auto tallies = tally_rows_parallel(rows);
    std::vector<agent_rate> rates;
    rates.reserve(tallies.size());
    for (const auto& [agent, tally] : tallies) {
        if (tally.simulated < 1) {
            continue;
        }
        rates.push_back({agent, conflict_rate(tally.conflicting, tally.simulated)});
    }
    std::sort(rates.begin(), rates.end(), [](const agent_rate& a, const agent_rate& b) {
        if (a.estimate.rate != b.estimate.rate) {
            return a.estimate.rate < b.estimate.rate;
        }
        return a.agent < b.agent;
    });
    return rates;
}

severity_summary_result severity_summary(std::span<const pull_request_row> rows) {
    auto tallies = tally_rows_parallel(rows);

    severity_summary_result result;
    agent_tally overall;
    for (const auto& [agent, tally] : tallies) {
        if (tally.conflicting == 0) {
            continue;
        }
        result.rows.push_back(summarize(agent, tally));
        overall.conflicting += tally.conflicting;
        overall.files_sum += tally.files_sum;
        overall.regions_sum += tally.regions_sum;
        overall.lines_sum += tally.lines_sum;
        overall.conflicting_files_values.insert(overall.conflicting_files_values.end(),
                                                tally.conflicting_files_values.begin(),
                                                tally.conflicting_files_values.end());

        // Histogram of conflict_lines on decade bins, one series per agent.
        std::map<int, std::int64_t> counts;
        for (auto lines : tally.conflicting_lines_values) {
            counts[decade_bin(lines)] += 1;
        }
        for (const auto& [bin, count] : counts) {
            auto [lo, hi] = decade_bounds(bin);
            result.hist.push_back({agent, lo, hi, count});
        }
    }
    if (overall.conflicting > 0) {
        result.rows.push_back(summarize("ALL", overall));
    }
    return result;
}

decile_result churn_deciles(std::span<const pull_request_row> rows) {
    decile_result result;

    struct entry {
        std::int64_t churn;
        const pull_request_row* row;
    };
    std::vector<entry> entries;
    for (const auto& row : rows) {
        if (!row.outcome) {
            continue;
        }
        if (!row.additions && !row.deletions) {
            result.excluded_missing_churn += 1;
            continue;
        }
        entries.push_back({row.additions.value_or(0) + row.deletions.value_or(0), &row});
    }
    if (entries.empty()) {
        return result;
    }
    std::sort(entries.begin(), entries.end(), [](const entry& a, const entry& b) {
        if (a.churn != b.churn) {
            return a.churn < b.churn;
        }
        return a.row->pr_key < b.row->pr_key;
    });

    auto total = static_cast<std::int64_t>(entries.size());
    int bin_count = 10;
    if (total < 10) {
        bin_count = 1;
        result.single_bin_fallback = true;
    }
    for (int b = 0; b < bin_count; ++b) {
        auto begin = total * b / bin_count;
        auto end = total * (b + 1) / bin_count;
        if (begin >= end) {
            continue;
        }
        decile_bin bin;
        bin.bin_index = b;
        bin.churn_min = entries[static_cast<std::size_t>(begin)].churn;
        bin.churn_max = entries[static_cast<std::size_t>(end - 1)].churn;
        bin.n = end - begin;
        std::vector<std::int64_t> churns;
        churns.reserve(static_cast<std::size_t>(bin.n));
        for (auto i = begin; i < end; ++i) {
            const auto& e = entries[static_cast<std::size_t>(i)];
            churns.push_back(e.churn);
            if (e.row->outcome == merge_label::merge_conflict) {
                bin.k += 1;
            }
        }
        bin.median_churn = median_of_sorted(churns);  // already sorted by churn
        bin.rate = static_cast<double>(bin.k) / static_cast<double>(bin.n);
        result.bins.push_back(bin);
    }
    return result;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

void write_agent_rates_csv(const std::filesystem::path& path,
                           const std::vector<agent_rate>& rates) {
    csv_writer writer(path.string());
    writer.write_row({"agent", "n", "k", "rate_pct", "ci_low_pct", "ci_high_pct"});
    for (const auto& r : rates) {
        writer.write_row({r.agent, std::to_string(r.estimate.n), std::to_string(r.estimate.k),
                          format_percent(r.estimate.rate), format_percent(r.estimate.ci_low),
                          format_percent(r.estimate.ci_high)});
    }
    writer.close();
}

void write_severity_hist_csv(const std::filesystem::path& path,
                             const std::vector<severity_hist_bin>& bins) {
    csv_writer writer(path.string());
    writer.write_row({"agent", "conflict_lines_lo", "conflict_lines_hi", "count"});
    for (const auto& b : bins) {
        writer.write_row(
            {b.agent, std::to_string(b.lo), std::to_string(b.hi), std::to_string(b.count)});
    }
    writer.close();
}

void write_churn_deciles_csv(const std::filesystem::path& path, const decile_result& deciles) {
    csv_writer writer(path.string());
    writer.write_row(
        {"bin_index", "churn_min", "churn_max", "median_churn", "n", "k", "rate"});
    char buf[64];
    for (const auto& b : deciles.bins) {
        std::snprintf(buf, sizeof(buf), "%.1f", b.median_churn);
        std::string median(buf);
        std::snprintf(buf, sizeof(buf), "%.17g", b.rate);
        writer.write_row({std::to_string(b.bin_index), std::to_string(b.churn_min),
                          std::to_string(b.churn_max), median, std::to_string(b.n),
                          std::to_string(b.k), buf});
    }
    writer.close();
}

}  // namespace mergemine

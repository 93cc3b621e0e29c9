// Compares the serial reference kernels against their OpenMP counterparts
// on synthetic corpora sized like a real mining run.

#include "mergemine/analytics.hpp"
#include "mergemine/conflict.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace mergemine;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::vector<file_scan_input> make_conflicted_files(std::size_t count, std::mt19937& rng) {
    std::uniform_int_distribution<int> regions_dist(1, 8);
    std::uniform_int_distribution<int> side_dist(0, 30);
    std::uniform_int_distribution<int> plain_dist(0, 40);
    std::vector<file_scan_input> inputs;
    inputs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string text;
        int regions = regions_dist(rng);
        for (int r = 0; r < regions; ++r) {
            for (int p = plain_dist(rng); p > 0; --p) {
                text += "plain line " + std::to_string(p) + "\n";
            }
            text += "<<<<<<< HEAD\n";
            for (int s = side_dist(rng); s > 0; --s) {
                text += "ours content " + std::to_string(s) + "\n";
            }
            text += "=======\n";
            for (int s = side_dist(rng); s > 0; --s) {
                text += "theirs content " + std::to_string(s) + "\n";
            }
            text += ">>>>>>> feature\n";
        }
        inputs.push_back({"src/file_" + std::to_string(i) + ".cpp",
                          conflict_type::both_modified, std::move(text)});
    }
    return inputs;
}

std::vector<pull_request_row> make_rows(std::size_t count, std::mt19937& rng) {
    std::uniform_int_distribution<int> agent_dist(0, 4);
    std::uniform_int_distribution<int> outcome_dist(0, 99);
    std::uniform_int_distribution<int> lines_dist(1, 2000);
    const char* agents[] = {"agent_a", "agent_b", "agent_c", "agent_d", "agent_e"};
    std::vector<pull_request_row> rows(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& row = rows[i];
        row.pr_key = "owner/repo#" + std::to_string(i + 1);
        row.agent = agents[agent_dist(rng)];
        int o = outcome_dist(rng);
        if (o < 28) {
            row.outcome = merge_label::merge_conflict;
            row.metrics.num_conflict_files = 1 + o % 7;
            row.metrics.num_conflict_regions = 1 + o % 13;
            row.metrics.conflict_lines = lines_dist(rng);
        } else if (o < 98) {
            row.outcome = merge_label::merge_clean;
        } else {
            row.outcome = merge_label::merge_error;
        }
    }
    return rows;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t files = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
    std::size_t rows = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2000000;
    std::mt19937 rng(42);

    std::printf("threads: %d\n", omp_get_max_threads());

    {
        auto inputs = make_conflicted_files(files, rng);
        auto t0 = clock_type::now();
        auto serial = scan_files_serial("owner/repo#1", inputs);
        double ts = seconds_since(t0);
        t0 = clock_type::now();
        auto parallel = scan_files_parallel("owner/repo#1", inputs);
        double tp = seconds_since(t0);
        std::size_t serial_regions = 0, parallel_regions = 0;
        for (const auto& s : serial) serial_regions += s.regions.size();
        for (const auto& p : parallel) parallel_regions += p.regions.size();
        std::printf("conflict scan  %8zu files   serial %.3fs  parallel %.3fs  speedup %.2fx  "
                    "(regions %zu/%zu)\n",
                    files, ts, tp, ts / tp, serial_regions, parallel_regions);
    }

    {
        auto data = make_rows(rows, rng);
        auto t0 = clock_type::now();
        auto serial = tally_rows_serial(data);
        double ts = seconds_since(t0);
        t0 = clock_type::now();
        auto parallel = tally_rows_parallel(data);
        double tp = seconds_since(t0);
        std::int64_t serial_k = 0, parallel_k = 0;
        for (const auto& [agent, tally] : serial) serial_k += tally.conflicting;
        for (const auto& [agent, tally] : parallel) parallel_k += tally.conflicting;
        std::printf("row tally      %8zu rows    serial %.3fs  parallel %.3fs  speedup %.2fx  "
                    "(conflicts %lld/%lld)\n",
                    rows, ts, tp, ts / tp, static_cast<long long>(serial_k),
                    static_cast<long long>(parallel_k));
    }
    return 0;
}

// The OpenMP kernels must agree exactly with their serial references on
// arbitrary inputs; these are the checks that keep the production path
// honest.

#include "mergemine/analytics.hpp"
#include "mergemine/conflict.hpp"

#include <doctest.h>

#include <random>

using namespace mergemine;

namespace {

std::vector<file_scan_input> random_scan_inputs(std::size_t count, std::mt19937& rng) {
    std::uniform_int_distribution<int> type_dist(0, 3);
    std::uniform_int_distribution<int> block_count(0, 5);
    std::uniform_int_distribution<int> side_len(0, 8);
    std::uniform_int_distribution<int> noise(0, 99);

    std::vector<file_scan_input> inputs;
    for (std::size_t i = 0; i < count; ++i) {
        file_scan_input input;
        input.path = "dir" + std::to_string(i % 7) + "/file" + std::to_string(i) + ".cc";
        input.type = static_cast<conflict_type>(type_dist(rng));
        if (input.type == conflict_type::both_modified ||
            input.type == conflict_type::added_by_both) {
            std::string text;
            for (int b = block_count(rng); b > 0; --b) {
                text += "context " + std::to_string(noise(rng)) + "\n";
                text += "<<<<<<< HEAD\n";
                for (int s = side_len(rng); s > 0; --s) {
                    text += "ours " + std::to_string(noise(rng)) + "\n";
                }
                text += "=======\n";
                for (int s = side_len(rng); s > 0; --s) {
                    text += "theirs " + std::to_string(noise(rng)) + "\n";
                }
                text += ">>>>>>> branch\n";
            }
            if (noise(rng) < 5) {
                text += '\0';  // occasional binary
            }
            input.bytes = std::move(text);
        }
        inputs.push_back(std::move(input));
    }
    return inputs;
}

bool regions_equal(const conflict_region& a, const conflict_region& b) {
    return a.file_path == b.file_path && a.region_index == b.region_index &&
           a.start_line == b.start_line && a.mid_line == b.mid_line && a.end_line == b.end_line &&
           a.ours_len == b.ours_len && a.theirs_len == b.theirs_len &&
           a.ours_hash == b.ours_hash && a.theirs_hash == b.theirs_hash &&
           a.ours_preview == b.ours_preview && a.theirs_preview == b.theirs_preview;
}

std::vector<pull_request_row> random_rows(std::size_t count, std::mt19937& rng) {
    std::uniform_int_distribution<int> agent(0, 6);
    std::uniform_int_distribution<int> outcome(0, 3);
    std::uniform_int_distribution<std::int64_t> metric(0, 500);
    std::vector<pull_request_row> rows(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto& row = rows[i];
        row.pr_key = "o/r#" + std::to_string(i + 1);
        row.agent = "agent_" + std::to_string(agent(rng));
        switch (outcome(rng)) {
            case 0: row.outcome = merge_label::merge_clean; break;
            case 1:
                row.outcome = merge_label::merge_conflict;
                row.metrics = {metric(rng) % 20 + 1, metric(rng) % 40 + 1, metric(rng)};
                break;
            case 2: row.outcome = merge_label::merge_error; break;
            default: break;  // not simulated
        }
    }
    return rows;
}

}  // namespace

TEST_CASE("parallel file scan equals the serial reference") {
    std::mt19937 rng(2718);
    for (auto count : {std::size_t{0}, std::size_t{1}, std::size_t{37}, std::size_t{500}}) {
        auto inputs = random_scan_inputs(count, rng);
        auto serial = scan_files_serial("o/r#1", inputs);
        auto parallel = scan_files_parallel("o/r#1", inputs);
        REQUIRE(serial.size() == parallel.size());
        for (std::size_t i = 0; i < serial.size(); ++i) {
            CHECK(serial[i].record.file_path == parallel[i].record.file_path);
            CHECK(serial[i].record.num_regions == parallel[i].record.num_regions);
            CHECK(serial[i].record.conflict_lines == parallel[i].record.conflict_lines);
            CHECK(serial[i].record.type == parallel[i].record.type);
            CHECK(serial[i].notes == parallel[i].notes);
            REQUIRE(serial[i].regions.size() == parallel[i].regions.size());
            for (std::size_t r = 0; r < serial[i].regions.size(); ++r) {
                CHECK(regions_equal(serial[i].regions[r], parallel[i].regions[r]));
            }
        }
    }
}

TEST_CASE("parallel row tally equals the serial reference") {
    std::mt19937 rng(31415);
    for (auto count : {std::size_t{0}, std::size_t{1}, std::size_t{1000}, std::size_t{20000}}) {
        auto rows = random_rows(count, rng);
        auto serial = tally_rows_serial(rows);
        auto parallel = tally_rows_parallel(rows);
        REQUIRE(serial.size() == parallel.size());
        for (auto& [agent, expected] : serial) {
            REQUIRE(parallel.count(agent) == 1);
            auto& got = parallel[agent];
            CHECK(got.simulated == expected.simulated);
            CHECK(got.conflicting == expected.conflicting);
            CHECK(got.files_sum == expected.files_sum);
            CHECK(got.regions_sum == expected.regions_sum);
            CHECK(got.lines_sum == expected.lines_sum);
            // Value vectors feed sorted statistics; compare as multisets.
            auto sorted_files_expected = expected.conflicting_files_values;
            auto sorted_files_got = got.conflicting_files_values;
            std::sort(sorted_files_expected.begin(), sorted_files_expected.end());
            std::sort(sorted_files_got.begin(), sorted_files_got.end());
            CHECK(sorted_files_expected == sorted_files_got);
            auto sorted_lines_expected = expected.conflicting_lines_values;
            auto sorted_lines_got = got.conflicting_lines_values;
            std::sort(sorted_lines_expected.begin(), sorted_lines_expected.end());
            std::sort(sorted_lines_got.begin(), sorted_lines_got.end());
            CHECK(sorted_lines_expected == sorted_lines_got);
        }
    }
}

TEST_CASE("derived statistics agree between kernels") {
    std::mt19937 rng(1618);
    auto rows = random_rows(5000, rng);
    // per_agent_stats and severity_summary both run on the parallel kernel;
    // recompute them forcing the serial tally and compare.
    auto parallel_rates = per_agent_stats(rows);
    auto serial_tallies = tally_rows_serial(rows);
    for (const auto& rate : parallel_rates) {
        const auto& tally = serial_tallies.at(rate.agent);
        CHECK(rate.estimate.n == tally.simulated);
        CHECK(rate.estimate.k == tally.conflicting);
    }
}

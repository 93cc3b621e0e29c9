#include "mergemine/dataset.hpp"

#include "mergemine/csv.hpp"
#include "mergemine/text_util.hpp"
#include "support/git_fixture.hpp"

#include <doctest.h>

#include <random>

using namespace mergemine;
using namespace mergemine::testing;

namespace fs = std::filesystem;

namespace {

pull_request_row simulated_row(const std::string& key, merge_label outcome,
                               severity_metrics metrics = {}) {
    pull_request_row row;
    row.pr_key = key;
    auto hash = key.rfind('#');
    row.repo_full_name = key.substr(0, hash);
    row.pr_number = std::atoll(key.c_str() + hash + 1);
    row.agent = "agent_x";
    row.state = pr_state::open;
    row.outcome = outcome;
    row.metrics = metrics;
    row.status_code = outcome == merge_label::merge_clean ? "MERGE_CLEAN" : "MERGE_CONFLICT";
    return row;
}

entity_streams conflicting_streams() {
    entity_streams streams;
    streams.repositories.push_back({"o/r", 5, 1, "C++", false, false});
    streams.pull_requests.push_back(simulated_row("o/r#1", merge_label::merge_conflict,
                                                  {2, 3, 9}));

    conflict_file_record f1{"o/r#1", "a.txt", 2, 6, "txt", conflict_type::both_modified};
    conflict_file_record f2{"o/r#1", "b.txt", 1, 3, "txt", conflict_type::both_modified};
    streams.conflict_files = {f1, f2};

    for (int i = 0; i < 3; ++i) {
        conflict_region region;
        region.pr_key = "o/r#1";
        region.file_path = i < 2 ? "a.txt" : "b.txt";
        region.region_index = i < 2 ? i : 0;
        region.start_line = 1 + 10 * i;
        region.mid_line = region.start_line + 3;
        region.end_line = region.mid_line + 2;
        region.ours_len = 2;
        region.theirs_len = 1;
        region.ours_hash = std::string(64, 'a');
        region.theirs_hash = std::string(64, 'b');
        region.ours_preview = {"left"};
        region.theirs_preview = {"right"};
        streams.conflict_regions.push_back(region);
    }
    streams.conflict_file_commits.push_back(
        {"o/r#1", "a.txt", std::string(40, '1'), std::string(40, '2')});
    return streams;
}

}  // namespace

TEST_CASE("empty streams emit five header-only tables") {
    temp_dir dir("emit_empty");
    auto manifest = emit_tables({}, dir.path, dataset_variant::clean);
    REQUIRE(manifest.tables.size() == 5);
    for (const auto& table : manifest.tables) {
        CHECK(table.rows == 0);
        auto text = read_file_bytes((dir.path / table.file).string());
        CHECK(csv_parse(text).size() == 1);  // header only
    }
    CHECK(fs::exists(dir.path / "manifest.json"));
}

TEST_CASE("single clean PR fills only pull_request.csv") {
    temp_dir dir("emit_clean");
    entity_streams streams;
    streams.pull_requests.push_back(simulated_row("o/r#1", merge_label::merge_clean));
    auto manifest = emit_tables(streams, dir.path, dataset_variant::clean);
    for (const auto& table : manifest.tables) {
        if (table.file == "pull_request.csv" || table.file == "repository.csv") {
            continue;
        }
        CHECK(table.rows == 0);
    }
    auto rows = csv_parse(read_file_bytes((dir.path / "pull_request.csv").string()));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][0] == "o/r#1");
}

TEST_CASE("conflicting PR emits consistent child tables") {
    temp_dir dir("emit_conflict");
    auto streams = conflicting_streams();
    auto manifest = emit_tables(streams, dir.path, dataset_variant::clean);
    std::map<std::string, std::int64_t> rows;
    for (const auto& table : manifest.tables) {
        rows[table.file] = table.rows;
    }
    CHECK(rows["pull_request.csv"] == 1);
    CHECK(rows["conflict_file.csv"] == 2);
    CHECK(rows["conflict_region.csv"] == 3);
    CHECK(rows["conflict_file_commit.csv"] == 1);
    CHECK(rows["repository.csv"] == 1);
}

TEST_CASE("emission is byte-identical on re-run") {
    temp_dir dir("emit_deterministic");
    auto streams = conflicting_streams();
    // Scramble input order; emission must sort.
    std::swap(streams.conflict_regions[0], streams.conflict_regions[2]);

    auto first_dir = dir.path / "first";
    auto second_dir = dir.path / "second";
    emit_tables(streams, first_dir, dataset_variant::raw);
    emit_tables(streams, second_dir, dataset_variant::raw);
    for (const char* name : {"repository.csv", "pull_request.csv", "conflict_file.csv",
                             "conflict_region.csv", "conflict_file_commit.csv",
                             "manifest.json"}) {
        CHECK(read_file_bytes((first_dir / name).string()) ==
              read_file_bytes((second_dir / name).string()));
    }
}

TEST_CASE("referential integrity violations abort with the offending key") {
    temp_dir dir("emit_integrity");
    auto streams = conflicting_streams();

    SUBCASE("orphan conflict_file") {
        conflict_file_record orphan{"o/r#99", "x.txt", 0, 0, "txt",
                                    conflict_type::both_modified};
        streams.conflict_files.push_back(orphan);
        try {
            emit_tables(streams, dir.path, dataset_variant::clean);
            FAIL("expected integrity_error");
        } catch (const integrity_error& e) {
            CHECK(e.key() == "o/r#99");
        }
        CHECK_FALSE(fs::exists(dir.path / "pull_request.csv"));
    }
    SUBCASE("orphan region file") {
        auto region = streams.conflict_regions[0];
        region.file_path = "not-listed.txt";
        streams.conflict_regions.push_back(region);
        CHECK_THROWS_AS(emit_tables(streams, dir.path, dataset_variant::clean),
                        integrity_error);
    }
    SUBCASE("severity counters must match children") {
        streams.pull_requests[0].metrics.num_conflict_regions = 99;
        CHECK_THROWS_AS(emit_tables(streams, dir.path, dataset_variant::clean),
                        integrity_error);
    }
}

TEST_CASE("raw variant adds pipeline columns, clean drops them") {
    temp_dir dir("emit_variant");
    auto streams = conflicting_streams();
    streams.pull_requests[0].provenance = base_provenance::reconstructed;
    streams.pull_requests[0].fetch_attempts = 3;
    streams.pull_requests[0].fetch_http_status = 200;

    emit_tables(streams, dir.path / "raw", dataset_variant::raw);
    emit_tables(streams, dir.path / "clean", dataset_variant::clean);

    auto raw_rows = csv_parse(read_file_bytes((dir.path / "raw" / "pull_request.csv").string()));
    auto clean_rows =
        csv_parse(read_file_bytes((dir.path / "clean" / "pull_request.csv").string()));
    auto find = [](const std::vector<std::string>& header, const char* name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    };
    CHECK(find(raw_rows[0], "base_provenance") >= 0);
    CHECK(find(raw_rows[0], "fetch_attempts") >= 0);
    CHECK(find(raw_rows[0], "fetch_http_status") >= 0);
    CHECK(find(clean_rows[0], "base_provenance") < 0);
    CHECK(find(clean_rows[0], "fetch_attempts") < 0);
    CHECK(find(clean_rows[0], "fetch_http_status") < 0);
    CHECK(raw_rows[1][static_cast<std::size_t>(find(raw_rows[0], "base_provenance"))] ==
          "reconstructed");
}

TEST_CASE("pull_request table round-trips through the CSV") {
    temp_dir dir("emit_roundtrip");
    entity_streams streams;
    auto row = simulated_row("o/r#7", merge_label::merge_conflict, {1, 2, 3});
    row.created_at = 1735689600;
    row.additions = 10;
    row.deletions = 4;
    row.base_ref_oid = std::string(40, 'c');
    streams.pull_requests.push_back(row);
    conflict_file_record file{"o/r#7", "x.txt", 2, 3, "txt", conflict_type::both_modified};
    streams.conflict_files.push_back(file);
    conflict_region region;
    region.pr_key = "o/r#7";
    region.file_path = "x.txt";
    region.region_index = 0;
    region.start_line = 1;
    region.mid_line = 3;
    region.end_line = 5;
    streams.conflict_regions.push_back(region);
    region.region_index = 1;
    region.start_line = 7;
    region.mid_line = 9;
    region.end_line = 11;
    streams.conflict_regions.push_back(region);

    emit_tables(streams, dir.path, dataset_variant::clean);
    auto loaded = load_pull_request_table(dir.path / "pull_request.csv");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].pr_key == "o/r#7");
    CHECK(loaded[0].outcome == merge_label::merge_conflict);
    CHECK(loaded[0].metrics.num_conflict_regions == 2);
    CHECK(loaded[0].created_at == 1735689600);
    CHECK(loaded[0].additions == 10);
    CHECK(loaded[0].deletions == 4);
    CHECK(loaded[0].base_ref_oid == std::string(40, 'c'));
}

TEST_CASE("preview cells survive embedded newlines and invalid UTF-8") {
    temp_dir dir("emit_preview");
    auto streams = conflicting_streams();
    streams.conflict_regions[0].ours_preview = {"line \"quoted\", with comma",
                                                std::string("bad\xFFbyte")};
    emit_tables(streams, dir.path, dataset_variant::clean);
    auto rows = csv_parse(read_file_bytes((dir.path / "conflict_region.csv").string()));
    REQUIRE(rows.size() == 4);
    bool found = false;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& cell = rows[i][10];
        if (cell.find("quoted") != std::string::npos) {
            found = true;
            CHECK(cell.find('\n') != std::string::npos);          // joined with a real newline
            CHECK(cell.find("\xEF\xBF\xBD") != std::string::npos);  // replacement character
        }
    }
    CHECK(found);
}

TEST_CASE("csv writer and parser agree on hostile cells") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> len(0, 12);
    std::uniform_int_distribution<int> chars(0, 6);
    const char* alphabet[] = {"a", ",", "\"", "\n", "\r\n", "x", " "};
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<std::string> row;
        for (int c = 0; c < 3; ++c) {
            std::string cell;
            for (int i = len(rng); i > 0; --i) {
                cell += alphabet[chars(rng)];
            }
            row.push_back(cell);
        }
        auto parsed = csv_parse(csv_join_row(row));
        REQUIRE(parsed.size() == 1);
        CHECK(parsed[0] == row);
    }
}

TEST_CASE("run log appends, loads, and resumes") {
    temp_dir dir("runlog");
    auto path = dir.path / "run_log.jsonl";

    {
        run_log log(path);
        run_log_entry fetch;
        fetch.pr_key = "o/r#1";
        fetch.phase = run_phase::fetch;
        fetch.status_code = "NOT_FOUND";
        fetch.timestamp = 1700000000;
        fetch.terminal = true;
        log.append(fetch);

        run_log_entry simulate;
        simulate.pr_key = "o/r#2";
        simulate.phase = run_phase::simulate;
        simulate.status_code = "MERGE_CLEAN";
        simulate.timestamp = 1700000001;
        simulate.terminal = true;
        simulate.commands = {"git merge --no-commit --no-ff abc -> 0"};
        log.append(simulate);

        run_log_entry progress;
        progress.pr_key = "o/r#3";
        progress.phase = run_phase::prepare;
        progress.status_code = "OK";
        progress.terminal = false;
        log.append(progress);
    }

    auto entries = run_log::load(path);
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].status_code == "NOT_FOUND");
    CHECK(entries[1].commands.size() == 1);

    auto terminal = run_log::terminal_keys(path);
    CHECK(terminal.size() == 2);
    CHECK(terminal.count("o/r#1") == 1);
    CHECK(terminal.count("o/r#3") == 0);

    // Append-only: reopening keeps prior entries.
    {
        run_log log(path);
        run_log_entry extra;
        extra.pr_key = "o/r#3";
        extra.phase = run_phase::simulate;
        extra.status_code = "MERGE_CONFLICT";
        extra.terminal = true;
        log.append(extra);
    }
    CHECK(run_log::load(path).size() == 4);
    CHECK(run_log::terminal_keys(path).size() == 3);

    // A torn final line (interrupted writer) is tolerated.
    {
        std::ofstream out(path, std::ios::app);
        out << "{\"pr_key\":\"o/r#4\",\"phase\":\"sim";
    }
    CHECK(run_log::load(path).size() == 4);
}

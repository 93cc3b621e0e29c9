// Drives the installed binary end to end over fixture repositories:
// subcommand wiring, exit codes, and the offline stage replay path.

#include "mergemine/csv.hpp"
#include "mergemine/pipeline.hpp"
#include "mergemine/text_util.hpp"
#include "support/git_fixture.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>

using namespace mergemine;
using namespace mergemine::testing;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

struct cli_result {
    int exit_code = -1;
    std::string out;
};

cli_result run_cli(const std::string& args) {
    auto out_file = fs::temp_directory_path() / ("cli_out_" + std::to_string(::getpid()));
    std::string command = std::string(MERGEMINE_BIN) + " " + args + " > " + out_file.string() +
                          " 2>&1";
    int rc = std::system(command.c_str());
    cli_result result;
    result.exit_code = rc == -1 ? -1 : WEXITSTATUS(rc);
    if (fs::exists(out_file)) {
        result.out = read_file_bytes(out_file.string());
        fs::remove(out_file);
    }
    return result;
}

// metadata.jsonl line as the fetch stage would have written it.
std::string metadata_line(const std::string& pr_key, const merge_scenario& scenario) {
    json j;
    j["pr_key"] = pr_key;
    j["status"] = {{"code", "OK"}, {"http_status", 200}, {"attempts", 1}};
    j["metadata"] = {{"pr_key", pr_key},
                     {"state", "open"},
                     {"created_at", 1735689600},
                     {"closed_at", nullptr},
                     {"merged_at", nullptr},
                     {"base_ref_name", scenario.base_ref_name},
                     {"head_ref_name", scenario.head_ref_name},
                     {"base_ref_oid", scenario.base_oid},
                     {"head_ref_oid", scenario.head_oid},
                     {"mergeable", "unknown"}};
    j["repository"] = {{"repo_full_name", scenario.repo_full_name},
                       {"stars", 3},
                       {"forks", 1},
                       {"primary_language", "C++"},
                       {"is_archived", false},
                       {"is_fork", false}};
    return j.dump();
}

}  // namespace

TEST_CASE("cli help and bad flags") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("simulate --no-such-flag").exit_code != 0);
    CHECK(run_cli("").exit_code != 0);  // subcommand required
    CHECK(run_cli("ingest").exit_code != 0);  // --corpus required
}

TEST_CASE("cli stages run offline over fixtures") {
    temp_dir dir("cli_stages");
    git_fixture fixture(dir.path);
    auto clean = build_clean_scenario(fixture, "octo/clean");
    auto conflict = build_conflict_scenario(fixture, "acme/conflict");

    auto corpus = dir.path / "corpus.csv";
    write_file_bytes(corpus.string(),
                     "repo_full_name,pr_number,agent,state,additions,deletions\n"
                     "octo/clean,1,agent_a,open,4,1\n"
                     "acme/conflict,2,agent_b,open,9,2\n");
    auto out_dir = dir.path / "out";
    auto cache_dir = dir.path / "cache";

    auto ingest = run_cli("ingest --corpus " + corpus.string() + " --out " + out_dir.string());
    CHECK(ingest.exit_code == 0);
    CHECK(fs::exists(out_dir / candidates_file));

    // Pre-written metadata stands in for the fetch stage (its own behavior
    // is covered against the scripted transport).
    {
        std::ofstream meta(out_dir / metadata_file);
        meta << metadata_line("octo/clean#1", clean) << '\n';
        meta << metadata_line("acme/conflict#2", conflict) << '\n';
    }
    auto fetch_offline = run_cli("fetch --offline --out " + out_dir.string());
    CHECK(fetch_offline.exit_code == 0);
    CHECK(fetch_offline.out.find("2 OK") != std::string::npos);

    auto simulate = run_cli("simulate --out " + out_dir.string() + " --cache-dir " +
                            cache_dir.string() + " --remote-base '" + fixture.remote_base() +
                            "' --variant raw --workers 2");
    CHECK(simulate.exit_code == 0);
    CHECK(simulate.out.find("MERGE_CLEAN: 1") != std::string::npos);
    CHECK(simulate.out.find("MERGE_CONFLICT: 1") != std::string::npos);
    CHECK(fs::exists(out_dir / "pull_request.csv"));
    CHECK(fs::exists(out_dir / "manifest.json"));

    auto analyze = run_cli("analyze --out " + out_dir.string());
    CHECK(analyze.exit_code == 0);
    CHECK(fs::exists(out_dir / "agent_rates.csv"));
    CHECK(fs::exists(out_dir / "severity_hist.csv"));
    CHECK(fs::exists(out_dir / "churn_deciles.csv"));
    CHECK(analyze.out.find("agent_b") != std::string::npos);

    // simulate --resume over the same inputs is a no-op with exit 0.
    auto resume = run_cli("simulate --resume --offline --out " + out_dir.string() +
                          " --cache-dir " + cache_dir.string() + " --remote-base '" +
                          fixture.remote_base() + "' --variant raw");
    CHECK(resume.exit_code == 0);
    CHECK(resume.out.find("skipped (already terminal): 2") != std::string::npos);
}

TEST_CASE("cli analyze reproduces the published table from a crafted dataset") {
    temp_dir dir("cli_table2");
    auto out_dir = dir.path / "out";
    fs::create_directories(out_dir);

    // pull_request.csv whose per-agent (n, k) pairs match the published
    // ones; rows are minimal but schema-complete.
    struct agent_counts {
        const char* agent;
        std::int64_t n;
        std::int64_t k;
    };
    const agent_counts table[] = {
        {"Copilot", 16954, 2583},   {"Cursor", 7196, 1421},      {"Devin", 8241, 1883},
        {"Claude_Code", 779, 202},  {"OpenAI_Codex", 73856, 23520},
    };
    csv_writer writer((out_dir / "pull_request.csv").string());
    writer.write_row({"pr_key", "repo_full_name", "pr_number", "agent", "state", "created_at",
                      "closed_at", "merged_at", "base_ref_oid", "head_ref_oid",
                      "simulated_base_oid", "mergeable_signal", "outcome", "num_conflict_files",
                      "num_conflict_regions", "conflict_lines", "additions", "deletions",
                      "status_code"});
    int id = 0;
    for (const auto& counts : table) {
        for (std::int64_t i = 0; i < counts.n; ++i) {
            bool conflicting = i < counts.k;
            writer.write_row({"o/r#" + std::to_string(++id), "o/r", std::to_string(id),
                              counts.agent, "open", "", "", "", "", "", "", "unknown",
                              conflicting ? "merge_conflict" : "merge_clean",
                              conflicting ? "1" : "0", conflicting ? "1" : "0",
                              conflicting ? "2" : "0", "10", "5",
                              conflicting ? "MERGE_CONFLICT" : "MERGE_CLEAN"});
        }
    }
    writer.close();

    auto analyze = run_cli("analyze --out " + out_dir.string());
    REQUIRE(analyze.exit_code == 0);

    auto rows = csv_parse(read_file_bytes((out_dir / "agent_rates.csv").string()));
    REQUIRE(rows.size() == 6);
    // Sorted ascending by rate: Copilot first, OpenAI_Codex last.
    CHECK(rows[1][0] == "Copilot");
    CHECK(rows[1][3] == "15.24");
    CHECK(rows[1][4] == "14.69");
    CHECK(rows[1][5] == "15.78");
    CHECK(rows[5][0] == "OpenAI_Codex");
    CHECK(rows[5][3] == "31.85");
    CHECK(rows[5][4] == "31.51");
    CHECK(rows[5][5] == "32.18");
}

TEST_CASE("cli run with empty corpus exits nonzero") {
    temp_dir dir("cli_empty");
    auto corpus = dir.path / "corpus.csv";
    write_file_bytes(corpus.string(), "repo_full_name,pr_number\n");
    auto result = run_cli("run --corpus " + corpus.string() + " --out " +
                          (dir.path / "out").string() + " --offline");
    CHECK(result.exit_code != 0);
    CHECK(result.out.find("no work") != std::string::npos);
}

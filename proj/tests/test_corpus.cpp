#include "mergemine/corpus.hpp"

#include "mergemine/text_util.hpp"
#include "support/git_fixture.hpp"

#include <doctest.h>

#include <random>

using namespace mergemine;

TEST_CASE("make_pr_key forms the canonical identifier") {
    CHECK(make_pr_key("openai/codex", 612) == "openai/codex#612");
    CHECK(make_pr_key("a/b", 1) == "a/b#1");
    CHECK(make_pr_key("Owner/Repo", 42) == "Owner/Repo#42");  // case preserved
}

TEST_CASE("make_pr_key rejects malformed input") {
    CHECK_THROWS_AS(make_pr_key("norepo", 1), std::invalid_argument);
    CHECK_THROWS_AS(make_pr_key("a/b/c", 1), std::invalid_argument);
    CHECK_THROWS_AS(make_pr_key("/b", 1), std::invalid_argument);
    CHECK_THROWS_AS(make_pr_key("a/", 1), std::invalid_argument);
    CHECK_THROWS_AS(make_pr_key("a#x/b", 1), std::invalid_argument);  // '#' reserved for the key
    CHECK_THROWS_AS(make_pr_key("a/b", 0), std::invalid_argument);
    CHECK_THROWS_AS(make_pr_key("a/b", -5), std::invalid_argument);
}

TEST_CASE("make_pr_key is stable and splits back") {
    auto a = make_pr_key("owner/repo", 7);
    auto b = make_pr_key("owner/repo", 7);
    CHECK(a == b);

    std::mt19937 rng(7);
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<int> letter(0, 25);
    std::uniform_int_distribution<std::int64_t> number(1, 999999);
    for (int i = 0; i < 500; ++i) {
        std::string owner, name;
        for (int c = len(rng); c > 0; --c) owner.push_back(static_cast<char>('a' + letter(rng)));
        for (int c = len(rng); c > 0; --c) name.push_back(static_cast<char>('a' + letter(rng)));
        auto repo = owner + "/" + name;
        auto pr_number = number(rng);
        auto [repo_back, number_back] = split_pr_key(make_pr_key(repo, pr_number));
        CHECK(repo_back == repo);
        CHECK(number_back == pr_number);
    }
}

TEST_CASE("filter_candidates implements the two-phase rule") {
    pull_request_record open_pr;
    open_pr.repo_full_name = "a/b";
    open_pr.pr_number = 1;
    open_pr.pr_key = "a/b#1";
    open_pr.state = pr_state::open;

    pull_request_record closed_merged = open_pr;
    closed_merged.pr_number = 2;
    closed_merged.pr_key = "a/b#2";
    closed_merged.state = pr_state::closed;
    closed_merged.merged_at = 1700000000;

    pull_request_record closed_unmerged = open_pr;
    closed_unmerged.pr_number = 3;
    closed_unmerged.pr_key = "a/b#3";
    closed_unmerged.state = pr_state::closed;
    closed_unmerged.closed_at = 1700000000;

    pull_request_record unknown = open_pr;
    unknown.pr_number = 4;
    unknown.pr_key = "a/b#4";
    unknown.state = pr_state::unknown;

    pull_request_record merged = open_pr;
    merged.pr_number = 5;
    merged.pr_key = "a/b#5";
    merged.state = pr_state::merged;
    merged.merged_at = 1700000000;

    std::vector<pull_request_record> records = {open_pr, closed_merged, closed_unmerged, unknown,
                                                merged};
    auto result = filter_candidates(records);

    CHECK(result.retained.size() + result.excluded.size() == records.size());
    REQUIRE(result.retained.size() == 3);
    CHECK(result.retained[0].record.pr_key == "a/b#1");
    CHECK_FALSE(result.retained[0].deferred);
    CHECK(result.retained[1].record.pr_key == "a/b#3");
    CHECK_FALSE(result.retained[1].deferred);
    CHECK(result.retained[2].record.pr_key == "a/b#4");
    CHECK(result.retained[2].deferred);  // unknown state: decision deferred to metadata
    REQUIRE(result.excluded.size() == 2);
    CHECK(result.excluded[0].reason == "merged");
    CHECK(result.excluded[1].reason == "merged");
}

TEST_CASE("filter_candidates partition property") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> state_dist(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<pull_request_record> records;
    for (int i = 0; i < 300; ++i) {
        pull_request_record rec;
        rec.repo_full_name = "o/r";
        rec.pr_number = i + 1;
        rec.pr_key = make_pr_key("o/r", i + 1);
        rec.state = static_cast<pr_state>(state_dist(rng));
        if (coin(rng)) {
            rec.merged_at = 1700000000 + i;
        }
        records.push_back(rec);
    }
    auto result = filter_candidates(records);
    CHECK(result.retained.size() + result.excluded.size() == records.size());
}

namespace {

std::filesystem::path write_temp(const testing::temp_dir& dir, const std::string& name,
                                 const std::string& content) {
    auto path = dir.path / name;
    write_file_bytes(path.string(), content);
    return path;
}

}  // namespace

TEST_CASE("load_corpus CSV basics") {
    testing::temp_dir dir("corpus_csv");

    SUBCASE("flagship row") {
        auto path = write_temp(dir, "c.csv",
                               "repo_full_name,pr_number,agent,state\n"
                               "openai/codex,612,OpenAI_Codex,open\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].pr_key == "openai/codex#612");
        CHECK(result.records[0].agent == "OpenAI_Codex");
        CHECK(result.records[0].state == pr_state::open);
        CHECK_FALSE(result.records[0].churn_known);
        CHECK(result.issues.empty());
    }

    SUBCASE("empty file with valid header") {
        auto path = write_temp(dir, "empty.csv", "repo_full_name,pr_number\n");
        auto result = load_corpus(path, corpus_format::csv);
        CHECK(result.records.empty());
        CHECK(result.issues.empty());
    }

    SUBCASE("leading zeros normalize decimally") {
        auto path = write_temp(dir, "zeros.csv",
                               "repo_full_name,pr_number\n"
                               "a/b,0012\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].pr_number == 12);
        CHECK(result.records[0].pr_key == "a/b#12");
    }

    SUBCASE("bad rows are reported, not dropped silently") {
        auto path = write_temp(dir, "bad.csv",
                               "repo_full_name,pr_number,state\n"
                               ",1,open\n"
                               "a/b,,open\n"
                               "a/b,xyz,open\n"
                               "a#c/b,5,open\n"
                               "a/b,7,open\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].pr_key == "a/b#7");
        CHECK(result.issues.size() == 4);
        CHECK(result.issues[0].row == 1);
    }

    SUBCASE("duplicates keep the first occurrence") {
        auto path = write_temp(dir, "dup.csv",
                               "repo_full_name,pr_number,agent\n"
                               "a/b,1,first\n"
                               "a/b,1,second\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].agent == "first");
        REQUIRE(result.issues.size() == 1);
        CHECK(result.issues[0].reason.find("duplicate") != std::string::npos);
    }

    SUBCASE("quoted cells with embedded commas and newlines") {
        auto path = write_temp(dir, "quoted.csv",
                               "repo_full_name,pr_number,agent\n"
                               "a/b,1,\"agent, with\ncomma\"\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].agent == "agent, with\ncomma");
    }

    SUBCASE("missing required header throws") {
        auto path = write_temp(dir, "nohdr.csv", "repository,number\nfoo,1\n");
        CHECK_THROWS_AS(load_corpus(path, corpus_format::csv), std::runtime_error);
    }

    SUBCASE("missing file throws") {
        CHECK_THROWS_AS(load_corpus(dir.path / "nope.csv", corpus_format::csv),
                        std::runtime_error);
    }
}

TEST_CASE("load_corpus CSV normalization and flags") {
    testing::temp_dir dir("corpus_norm");

    SUBCASE("merged_at implies merged state") {
        auto path = write_temp(dir, "m.csv",
                               "repo_full_name,pr_number,state,merged_at\n"
                               "a/b,1,closed,2025-03-01T10:00:00Z\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].state == pr_state::merged);
        CHECK_FALSE(result.records[0].inconsistent);
    }

    SUBCASE("open with closed_at is flagged and retained") {
        auto path = write_temp(dir, "i.csv",
                               "repo_full_name,pr_number,state,closed_at\n"
                               "a/b,1,open,2025-03-01T10:00:00Z\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].inconsistent);
        auto filtered = filter_candidates(result.records);
        CHECK(filtered.retained.size() == 1);
    }

    SUBCASE("churn columns") {
        auto path = write_temp(dir, "churn.csv",
                               "repo_full_name,pr_number,additions,deletions\n"
                               "a/b,1,10,3\n");
        auto result = load_corpus(path, corpus_format::csv);
        REQUIRE(result.records.size() == 1);
        CHECK(result.records[0].churn_known);
        CHECK(result.records[0].additions == 10);
        CHECK(result.records[0].deletions == 3);
    }
}

TEST_CASE("load_corpus JSONL") {
    testing::temp_dir dir("corpus_jsonl");
    auto path = write_temp(
        dir, "c.jsonl",
        R"({"repo_full_name":"openai/codex","pr_number":612,"agent":"OpenAI_Codex","state":"open","additions":5,"deletions":1})"
        "\n"
        R"({"repo_full_name":"a/b","pr_number":"0044","state":"closed","closed_at":"2025-02-02T00:00:00Z"})"
        "\n"
        "this is not json\n"
        R"({"pr_number":9})"
        "\n");
    auto result = load_corpus(path, corpus_format::jsonl);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].pr_key == "openai/codex#612");
    CHECK(result.records[0].churn_known);
    CHECK(result.records[1].pr_number == 44);
    CHECK(result.records[1].closed_at.has_value());
    CHECK(result.issues.size() == 2);
}

TEST_CASE("timestamp parsing round trip") {
    auto ts = parse_timestamp("2025-03-01T10:15:30Z");
    REQUIRE(ts.has_value());
    CHECK(format_timestamp(*ts) == "2025-03-01T10:15:30Z");
    CHECK(parse_timestamp("2025-03-01 10:15:30+00:00") == ts);
    CHECK(parse_timestamp(std::to_string(*ts)) == ts);
    CHECK_FALSE(parse_timestamp("").has_value());
    CHECK_FALSE(parse_timestamp("not a date").has_value());
    CHECK_FALSE(parse_timestamp("2025-03-01T10:15:30+05:00").has_value());
}

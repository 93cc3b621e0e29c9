#include "mergemine/pipeline.hpp"

#include "mergemine/text_util.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

using namespace mergemine;

std::vector<std::string> tokens_from_env_or_file(const std::string& tokens_file) {
    if (!tokens_file.empty()) {
        return token_pool::parse_env(read_file_bytes(tokens_file));
    }
    const char* env = std::getenv("GITHUB_TOKENS");
    return env ? token_pool::parse_env(env) : std::vector<std::string>{};
}

void print_summary(const pipeline_summary& summary) {
    std::cout << "terminal statuses:\n";
    for (const auto& [status, count] : summary.terminal_counts) {
        std::cout << "  " << status << ": " << count << "\n";
    }
    std::cout << "processed this run: " << summary.processed << "\n";
    if (summary.skipped_resume > 0) {
        std::cout << "skipped (already terminal): " << summary.skipped_resume << "\n";
    }
}

void print_analysis(const analyze_output& analysis) {
    std::cout << "conflict rate by agent (95% CI):\n";
    for (const auto& r : analysis.rates) {
        std::cout << "  " << r.agent << ": " << format_percent(r.estimate.rate) << "% ["
                  << format_percent(r.estimate.ci_low) << ", "
                  << format_percent(r.estimate.ci_high) << "]  n=" << r.estimate.n
                  << " k=" << r.estimate.k << "\n";
    }
    std::cout << "conflict severity (conflicting PRs only):\n";
    for (const auto& s : analysis.severity.rows) {
        std::cout << "  " << s.agent << ": n=" << s.n_conflicting << " mean_files=" << s.mean_files
                  << " median_files=" << s.median_files << " mean_regions=" << s.mean_regions
                  << " mean_lines=" << s.mean_lines << "\n";
    }
    if (!analysis.deciles.bins.empty()) {
        std::cout << "churn deciles:\n";
        for (const auto& b : analysis.deciles.bins) {
            std::cout << "  bin " << b.bin_index << " churn [" << b.churn_min << ", "
                      << b.churn_max << "] median " << b.median_churn << ": rate "
                      << format_percent(b.rate) << "% (n=" << b.n << ")\n";
        }
        if (analysis.deciles.single_bin_fallback) {
            std::cout << "  (fewer than 10 rows: single-bin fallback)\n";
        }
    }
    if (analysis.deciles.excluded_missing_churn > 0) {
        std::cout << "rows without churn data: " << analysis.deciles.excluded_missing_churn
                  << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"merge-conflict mining pipeline for pull requests"};
    app.require_subcommand(1);

    pipeline_config config;
    std::string format = "csv";
    std::string variant = "clean";
    std::string tokens_file;

    auto add_common = [&](CLI::App* cmd, bool needs_corpus) {
        if (needs_corpus) {
            cmd->add_option("--corpus", config.corpus_path, "corpus export file")->required();
            cmd->add_option("--format", format, "corpus format: csv or jsonl")
                ->check(CLI::IsMember({"csv", "jsonl"}));
        }
        cmd->add_option("--out", config.out_dir, "output directory");
        return cmd;
    };
    auto add_repo_flags = [&](CLI::App* cmd) {
        cmd->add_option("--cache-dir", config.cache_dir, "repository cache directory");
        cmd->add_option("--workers", config.workers, "concurrent repository workers")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--preview-lines", config.preview_lines,
                        "preview lines stored per conflict side")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--variant", variant, "dataset variant: raw or clean")
            ->check(CLI::IsMember({"raw", "clean"}));
        cmd->add_flag("--resume", config.resume, "skip PRs already terminal in the run log");
        cmd->add_flag("--offline", config.offline, "fail instead of cloning or fetching");
        cmd->add_option("--remote-base", config.remote_base,
                        "clone URL prefix (file:// prefixes work for local mirrors)");
    };
    auto add_api_flags = [&](CLI::App* cmd) {
        cmd->add_option("--api-url", config.api_url, "GraphQL endpoint");
        cmd->add_option("--tokens-file", tokens_file, "file with comma-separated tokens");
        cmd->add_option("--max-attempts", config.retry.max_attempts, "retry bound per request")
            ->check(CLI::PositiveNumber);
    };

    auto* run_cmd = add_common(app.add_subcommand("run", "full pipeline, ingest through analyze"),
                               true);
    add_repo_flags(run_cmd);
    add_api_flags(run_cmd);

    auto* ingest_cmd =
        add_common(app.add_subcommand("ingest", "load, key, and filter the corpus"), true);

    auto* fetch_cmd = add_common(
        app.add_subcommand("fetch", "retrieve PR metadata for ingested candidates"), false);
    add_api_flags(fetch_cmd);
    fetch_cmd->add_flag("--offline", config.offline,
                        "reuse existing metadata.jsonl instead of querying");

    auto* simulate_cmd = add_common(
        app.add_subcommand("simulate", "simulate merges and emit the dataset tables"), false);
    add_repo_flags(simulate_cmd);

    auto* analyze_cmd = add_common(
        app.add_subcommand("analyze", "compute rates, severity, and churn deciles"), false);

    CLI11_PARSE(app, argc, argv);

    config.format = format == "jsonl" ? corpus_format::jsonl : corpus_format::csv;
    config.variant = variant == "raw" ? dataset_variant::raw : dataset_variant::clean;

    try {
        if (app.got_subcommand(ingest_cmd)) {
            auto out = ingest_stage(config);
            std::cout << "retained " << out.candidates.size() << " candidates, excluded "
                      << out.excluded << ", issues " << out.issues << "\n";
            return 0;
        }
        if (app.got_subcommand(fetch_cmd)) {
            config.tokens = tokens_from_env_or_file(tokens_file);
            if (!config.offline && config.tokens.empty()) {
                std::cerr << "no tokens: set GITHUB_TOKENS or pass --tokens-file\n";
                return 2;
            }
            auto candidates = load_candidates(config.out_dir);
            run_log log(config.out_dir / run_log_file);
            auto metadata = fetch_stage(config, candidates, nullptr, log);
            std::int64_t ok = 0;
            for (const auto& [key, result] : metadata) {
                if (result.status.code == fetch_code::ok) {
                    ++ok;
                }
            }
            std::cout << "metadata for " << metadata.size() << " PRs (" << ok << " OK)\n";
            return 0;
        }
        if (app.got_subcommand(simulate_cmd)) {
            check_git_version();
            auto candidates = load_candidates(config.out_dir);
            auto metadata = load_metadata(config.out_dir);
            run_log log(config.out_dir / run_log_file);
            auto summary = simulate_stage(config, candidates, metadata, log);
            print_summary(summary);
            return summary.ok() ? 0 : 1;
        }
        if (app.got_subcommand(analyze_cmd)) {
            auto analysis = analyze_stage(config.out_dir);
            print_analysis(analysis);
            std::cout << "wrote agent_rates.csv, severity_hist.csv, churn_deciles.csv\n";
            return 0;
        }
        if (app.got_subcommand(run_cmd)) {
            config.tokens = tokens_from_env_or_file(tokens_file);
            if (!config.offline && config.tokens.empty()) {
                std::cerr << "no tokens: set GITHUB_TOKENS or pass --tokens-file\n";
                return 2;
            }
            auto summary = run_pipeline(config);
            print_summary(summary);
            if (!summary.ok()) {
                std::cerr << (summary.processed == 0 && summary.skipped_resume == 0
                                  ? "no work: corpus produced no candidates\n"
                                  : "pipeline did not complete\n");
                return 1;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

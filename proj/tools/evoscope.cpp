// evoscope command-line front end. Exit codes: 0 success, 1 runtime
// failure, 2 invalid configuration or input.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "evoscope/workbench/workbench.hpp"

namespace wb = evoscope::workbench;

namespace {

nlohmann::json json_arg(const std::string& text) {
    if (!text.empty() && text.front() == '{') return nlohmann::json::parse(text);
    std::ifstream in(text);
    if (!in) throw evoscope::ConfigError("cannot open task file '" + text + "'");
    return nlohmann::json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evoscope: evolutionary search runs and search-dynamics analysis"};
    app.require_subcommand(1);

    std::string config;
    auto* run = app.add_subcommand("run", "Execute every run described by a config file");
    run->add_option("config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);

    std::vector<std::string> analyze_globs;
    std::string analyze_out = ".";
    auto* analyze = app.add_subcommand("analyze", "Compute generation summaries and run descriptors");
    analyze->add_option("trajectories", analyze_globs, "Trajectory files or glob patterns")->required();
    analyze->add_option("-o,--out", analyze_out, "Output directory");

    wb::StatsOptions stats_opt;
    std::string descriptors, generations, zeroshot_csv;
    auto* stats = app.add_subcommand("stats", "Fit a named regression spec");
    stats->add_option("-s,--spec", stats_opt.spec, "M1..M8, concurrent, lagged or heatmap")->required();
    stats->add_option("-d,--descriptors", descriptors, "descriptors.csv from analyze");
    stats->add_option("-g,--generations", generations, "generations.csv from analyze");
    stats->add_option("-z,--zeroshot", zeroshot_csv, "zeroshot.csv joined on (model, task)");
    stats->add_option("--bins", stats_opt.bins, "Bins per axis for heatmap")->check(CLI::PositiveNumber);
    stats->add_option("-o,--out", stats_opt.out_prefix, "Output prefix for .json and .csv")->required();

    std::vector<std::string> mds_globs;
    std::string mds_out = ".";
    wb::MdsOptions mds_opt;
    auto* mds = app.add_subcommand("mds", "Embed valid genomes in 2-D per task");
    mds->add_option("trajectories", mds_globs, "Trajectory files or glob patterns")->required();
    mds->add_option("-o,--out", mds_out, "Output directory");
    mds->add_option("--cap", mds_opt.cap_per_bucket, "Base samples per (operator, generation)");
    mds->add_option("--total", mds_opt.total_cap, "Fit every point when the total is at most this");
    mds->add_option("-k", mds_opt.k, "Neighbours for out-of-sample placement");
    mds->add_option("--power", mds_opt.p, "Inverse-distance weight exponent");
    mds->add_option("--seed", mds_opt.seed, "Sampling and initialization seed");
    mds->add_option("--max-iter", mds_opt.max_iter, "SMACOF iteration cap");
    mds->add_option("--eps", mds_opt.eps, "Relative stress-decrease tolerance");

    wb::ZeroShotOptions zs_opt;
    zs_opt.prompt_dir = evoscope::ops::PromptLibrary::default_dir();
    zs_opt.out_dir = ".";
    std::string zs_task, zs_mock;
    auto* zs = app.add_subcommand("zeroshot", "Best-of-12 zero-shot baseline for one model");
    zs->add_option("-t,--task", zs_task, "Task JSON file or inline JSON object")->required();
    zs->add_option("-m,--model", zs_opt.model, "Model name")->required();
    zs->add_option("--mock", zs_mock, "Replay replies from a JSONL file instead of HTTP")->check(CLI::ExistingFile);
    zs->add_option("--prompts", zs_opt.prompt_dir, "Prompt template directory")->check(CLI::ExistingDirectory);
    zs->add_option("-o,--out", zs_opt.out_dir, "Output directory");

    std::vector<std::string> ledgers;
    std::string prices, cost_out;
    auto* cost = app.add_subcommand("cost", "Price exchange ledgers");
    cost->add_option("ledgers", ledgers, "ledger.jsonl files")->required()->check(CLI::ExistingFile);
    cost->add_option("-p,--prices", prices, "Price table JSON")->required()->check(CLI::ExistingFile);
    cost->add_option("-o,--out", cost_out, "Write the CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto s = wb::cmd_run(config, std::cerr);
            std::cerr << "wrote " << s.trajectories.size() << " trajectories and " << s.manifest.string() << "\n";
        } else if (*analyze) {
            const auto s = wb::cmd_analyze(analyze_globs, analyze_out, std::cerr);
            std::cerr << s.runs << " run(s) analyzed into " << analyze_out << "\n";
        } else if (*stats) {
            if (!descriptors.empty()) stats_opt.descriptors = descriptors;
            if (!generations.empty()) stats_opt.generations = generations;
            if (!zeroshot_csv.empty()) stats_opt.zeroshot = zeroshot_csv;
            wb::cmd_stats(stats_opt, std::cerr);
        } else if (*mds) {
            wb::cmd_mds(mds_globs, mds_out, mds_opt, std::cerr);
        } else if (*zs) {
            zs_opt.task = json_arg(zs_task);
            if (!zs_mock.empty()) zs_opt.mock_replies = zs_mock;
            wb::cmd_zeroshot(zs_opt, std::cerr);
        } else if (*cost) {
            std::vector<std::filesystem::path> paths(ledgers.begin(), ledgers.end());
            const auto csv = wb::cmd_cost(paths, prices, std::cerr);
            if (cost_out.empty()) std::cout << csv;
            else wb::atomic_write(cost_out, csv);
        }
    } catch (const evoscope::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const evoscope::llm::ConfigurationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

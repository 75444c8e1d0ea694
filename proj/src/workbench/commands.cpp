#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "evoscope/geometry/geometry.hpp"
#include "evoscope/llm/cost.hpp"
#include "evoscope/metrics/metrics.hpp"
#include "evoscope/stats/stats.hpp"
#include "evoscope/workbench/workbench.hpp"

namespace evoscope::workbench {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::shared_ptr<llm::ChatBackend> make_backend(const std::optional<std::filesystem::path>& mock) {
    if (mock) return llm::MockBackend::from_jsonl(mock->string());
    return llm::HttpBackend::from_env();
}

std::string ledger_jsonl(const std::vector<llm::ChatExchange>& exchanges) {
    std::string out;
    for (const auto& ex : exchanges) {
        auto j = ex.to_json();
        j.erase("latency_ms");
        out += j.dump() + "\n";
    }
    return out;
}

struct PlannedRun {
    std::string run_id;
    std::size_t variant = 0;
    std::size_t repetition = 0;
};

}  // namespace

RunSummary cmd_run(const std::filesystem::path& config_path, std::ostream& log) {
    const nlohmann::json file_json = read_json_file(config_path);
    const std::string hash = config_hash(file_json);
    const auto base_dir = config_path.has_parent_path() ? config_path.parent_path() : std::filesystem::path(".");

    std::vector<RunConfig> variants;
    std::string problems;
    for (const auto& v : expand_matrix(file_json)) {
        try {
            variants.push_back(RunConfig::from_json(v, base_dir));
        } catch (const ConfigError& e) {
            problems += std::string(problems.empty() ? "" : "\n") + e.what();
        }
    }
    if (!problems.empty()) throw ConfigError(problems);

    const auto out_dir = variants.front().output_dir;
    const auto mock = variants.front().mock_replies;
    bool any_llm = false;
    for (const auto& v : variants) {
        if (v.output_dir != out_dir || v.mock_replies != mock)
            throw ConfigError("matrix variants must share output_dir and llm.mock_replies");
        any_llm = any_llm || v.op.uses_llm();
    }

    // Build every task, operator and backend before running anything, so
    // configuration errors surface before any work or output.
    std::vector<std::shared_ptr<const Task>> tasks;
    std::vector<std::unique_ptr<ops::PromptLibrary>> prompts;
    for (const auto& v : variants) {
        try {
            tasks.push_back(make_task(v.task));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("task: ") + e.what());
        }
        prompts.push_back(v.op.uses_llm() ? std::make_unique<ops::PromptLibrary>(v.prompt_dir) : nullptr);
    }
    std::shared_ptr<llm::Gateway> gateway;
    std::shared_ptr<llm::ChatBackend> backend;
    if (any_llm) {
        backend = make_backend(mock);
        gateway = std::make_shared<llm::Gateway>(backend, llm::RetryPolicy{}, variants.front().llm_max_in_flight);
    }

    struct Output {
        std::string run_id;
        std::string text;
        std::uint64_t seed;
        std::string variant;
        std::size_t repetition;
        double wall_seconds;
        std::size_t attempts;
    };
    std::vector<Output> outputs;
    std::set<std::string> ids;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const auto& v = variants[vi];
        const Task& task = *tasks[vi];
        for (std::size_t rep = 0; rep < v.repetitions; ++rep) {
            EvolutionConfig cfg = v.evolution;
            cfg.seed = v.evolution.seed + rep;
            ops::OperatorContext ctx{&task, gateway, prompts[vi].get(), {}};
            auto probe = ops::make_operator(v.op, ctx);
            std::string run_id = task.id() + "__" + probe->id();
            if (variants.size() > 1) run_id += "__v" + std::to_string(vi);
            run_id = sanitize(run_id + "__s" + std::to_string(cfg.seed));
            if (!ids.insert(run_id).second) throw ConfigError("duplicate run id '" + run_id + "'");
            ctx.run_id = run_id;
            auto op = ops::make_operator(v.op, ctx);

            const auto start = std::chrono::steady_clock::now();
            Trajectory traj = run_evolution(cfg, task, *op);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            traj.run_id = run_id;
            const nlohmann::json extra = {{"operator", v.op.to_json()},
                                          {"config_hash", hash},
                                          {"variant", v.variant},
                                          {"repetition", rep}};
            outputs.push_back({run_id, trajectory_to_jsonl(traj, task, extra), cfg.seed, v.variant, rep, wall,
                               traj.attempts().size()});
            log << run_id << ": " << traj.attempts().size() << " attempts, best " << num(traj.best_so_far.back())
                << "\n";
        }
    }

    RunSummary summary;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& o : outputs) {
        const auto path = out_dir / (o.run_id + ".jsonl");
        atomic_write(path, o.text);
        summary.trajectories.push_back(path);
        runs.push_back({{"run_id", o.run_id},
                        {"file", path.filename().string()},
                        {"seed", o.seed},
                        {"variant", o.variant},
                        {"repetition", o.repetition},
                        {"attempts", o.attempts},
                        {"sha256", sha256_hex(o.text)},
                        {"wall_seconds", o.wall_seconds}});
    }
    nlohmann::json manifest = {{"schema_version", kSchemaVersion},
                               {"config", std::filesystem::absolute(config_path).string()},
                               {"config_hash", hash},
                               {"finished_at", utc_now()},
                               {"runs", runs}};
    if (gateway) {
        const auto exchanges = gateway->ledger().snapshot();
        const auto ledger_path = out_dir / "ledger.jsonl";
        atomic_write(ledger_path, ledger_jsonl(exchanges));
        summary.ledger = ledger_path;
        summary.gateway_calls = exchanges.size();
        nlohmann::json latency = nlohmann::json::array();
        for (const auto& ex : exchanges) latency.push_back(ex.latency_ms);
        manifest["ledger"] = {{"file", "ledger.jsonl"}, {"exchanges", exchanges.size()}, {"latency_ms", latency}};
    }
    summary.manifest = out_dir / "manifest.json";
    atomic_write(summary.manifest, manifest.dump(2) + "\n");
    return summary;
}

AnalyzeSummary cmd_analyze(const std::vector<std::string>& patterns, const std::filesystem::path& out_dir,
                           std::ostream& log) {
    const auto files = expand_globs(patterns);
    if (files.empty()) {
        std::string msg = "no trajectory files match";
        for (const auto& p : patterns) msg += " '" + p + "'";
        msg += " (0 matches)";
        throw std::invalid_argument(msg);
    }
    std::map<std::string, std::vector<LoadedTrajectory>> by_task;
    for (const auto& f : files) {
        auto lt = read_trajectory(f);
        by_task[lt.traj.task_id].push_back(std::move(lt));
    }

    stats::DataFrame gens, descs, atts;
    std::vector<std::vector<std::string>> gen_rows, desc_rows, att_rows;
    const std::vector<std::string> gen_cols = {"run_id", "model", "task", "generation", "offspring_attempts",
                                               "valid_attempts", "breakthrough_count", "prob_breakthrough",
                                               "mean_novelty", "max_novelty", "h_spatial", "h_fitness", "sigma",
                                               "pool_size", "best_so_far"};
    const std::vector<std::string> desc_cols = {"run_id", "model", "task", "seed", "attempts", "valid_attempts",
                                                "breakthrough_rate", "lrr", "pcd", "avg_novelty", "initial_nov",
                                                "best_final_fitness", "initial_best_fitness"};
    const std::vector<std::string> att_cols = {"run_id", "task", "index", "generation", "valid", "raw_fitness",
                                               "raw_novelty", "normalized_novelty", "breakthrough", "operator_tag"};

    AnalyzeSummary summary;
    for (auto& [task_id, runs] : by_task) {
        summary.tasks.push_back(task_id);
        // Novelty is normalized over every run of this task instance.
        std::vector<metrics::RecordDistance> dists;
        std::vector<std::vector<std::optional<double>>> raws;
        std::vector<double> pooled;
        for (const auto& lt : runs) {
            dists.push_back(metrics::record_distance(lt.traj, *lt.task));
            raws.push_back(metrics::raw_novelty(lt.traj, dists.back()));
            for (const auto& r : raws.back())
                if (r) pooled.push_back(*r);
        }
        const auto normalized = metrics::normalize_novelty(pooled);
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& lt = runs[i];
            std::vector<std::optional<double>> norm(raws[i].size());
            for (std::size_t k = 0; k < raws[i].size(); ++k)
                if (raws[i][k]) norm[k] = normalized[cursor++];

            const auto model = lt.traj.operator_id;
            for (const auto& s : metrics::summarize_generations(lt.traj, *lt.task, norm))
                gen_rows.push_back({s.run_id, model, task_id, std::to_string(s.generation), num(s.offspring_attempts),
                                    num(s.valid_attempts), num(s.breakthrough_count), num(s.prob_breakthrough),
                                    num(s.mean_novelty), num(s.max_novelty), num(s.h_spatial), num(s.h_fitness),
                                    num(s.sigma), num(s.pool_size), num(s.best_so_far)});
            const auto d = metrics::describe_run(lt.traj, dists[i], norm);
            desc_rows.push_back({d.run_id, model, task_id, std::to_string(d.seed), num(d.attempts),
                                 num(d.valid_attempts), num(d.breakthrough_rate), num(d.lrr), num(d.pcd),
                                 num(d.avg_novelty), num(d.initial_nov), num(d.best_final_fitness),
                                 num(d.initial_best_fitness)});
            const auto bt = metrics::breakthroughs(lt.traj);
            std::set<std::size_t> events(bt.events.begin(), bt.events.end());
            const auto attempts = lt.traj.attempts();
            for (std::size_t k = 0; k < attempts.size(); ++k) {
                const auto& a = attempts[k];
                att_rows.push_back({lt.traj.run_id, task_id, num(k + lt.traj.initial_count), std::to_string(a.generation),
                                    a.valid ? "1" : "0", num(a.raw_fitness), raws[i][k] ? num(*raws[i][k]) : "",
                                    norm[k] ? num(*norm[k]) : "", events.count(k) ? "1" : "0", a.operator_tag});
            }
            ++summary.runs;
        }
        log << task_id << ": " << runs.size() << " run(s)\n";
    }

    auto emit = [&](const std::vector<std::string>& cols, std::vector<std::vector<std::string>>& rows,
                    const char* name) {
        stats::DataFrame df;
        for (const auto& c : cols) df.add_column(c, {});
        for (auto& r : rows) df.append_row(std::move(r));
        const auto path = out_dir / name;
        atomic_write(path, df.to_csv());
        return path;
    };
    summary.generations_csv = emit(gen_cols, gen_rows, "generations.csv");
    summary.descriptors_csv = emit(desc_cols, desc_rows, "descriptors.csv");
    summary.attempts_csv = emit(att_cols, att_rows, "attempts.csv");
    return summary;
}

namespace {

/// Adds a zero_shot_perf column joined on (model, task).
stats::DataFrame join_zeroshot(const stats::DataFrame& desc, const stats::DataFrame& zs) {
    const auto zm = zs.text("model");
    const auto zt = zs.text("task");
    const auto zv = zs.text("zero_shot_perf");
    std::map<std::pair<std::string, std::string>, std::string> lookup;
    for (std::size_t i = 0; i < zm.size(); ++i) lookup[{zm[i], zt[i]}] = zv[i];
    const auto m = desc.text("model");
    const auto t = desc.text("task");
    std::vector<std::string> col;
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < m.size(); ++i) {
        auto it = lookup.find({m[i], t[i]});
        if (it == lookup.end()) missing.push_back(m[i] + "/" + t[i]);
        col.push_back(it == lookup.end() ? "" : it->second);
    }
    if (!missing.empty()) throw stats::ColumnGap("zero_shot_perf missing for " + missing.front() +
                                                 (missing.size() > 1 ? " and others" : ""));
    stats::DataFrame out = desc;
    out.add_column("zero_shot_perf", std::move(col));
    return out;
}

}  // namespace

void cmd_stats(const StatsOptions& opt, std::ostream& log) {
    nlohmann::json out_json;
    std::string out_csv;
    if (opt.spec == "concurrent" || opt.spec == "lagged" || opt.spec == "heatmap") {
        if (!opt.generations) throw std::invalid_argument("spec " + opt.spec + " needs --generations");
        const auto gens = stats::DataFrame::read_csv(opt.generations->string());
        if (opt.spec == "heatmap") {
            for (const char* c : {"mean_novelty", "h_spatial", "prob_breakthrough"})
                if (!gens.has(c)) throw stats::ColumnGap(std::string("spec heatmap: missing column ") + c);
            const auto cells = stats::bin2d(gens.numeric("mean_novelty"), gens.numeric("h_spatial"),
                                            gens.numeric("prob_breakthrough"), opt.bins);
            out_json = nlohmann::json::array();
            out_csv = "ix,iy,novelty_lo,novelty_hi,h_spatial_lo,h_spatial_hi,count,mean_prob_breakthrough\n";
            for (const auto& c : cells) {
                out_json.push_back({{"ix", c.ix}, {"iy", c.iy}, {"x_lo", c.x_lo}, {"x_hi", c.x_hi}, {"y_lo", c.y_lo},
                                    {"y_hi", c.y_hi}, {"count", c.count},
                                    {"mean", c.count ? nlohmann::json(c.mean) : nlohmann::json(nullptr)}});
                out_csv += num(c.ix) + "," + num(c.iy) + "," + num(c.x_lo) + "," + num(c.x_hi) + "," + num(c.y_lo) +
                           "," + num(c.y_hi) + "," + num(c.count) + "," + num(c.mean) + "\n";
            }
        } else {
            const auto r = stats::fit_mixed_spec(gens, opt.spec);
            out_json = r.to_json();
            out_json["spec"] = opt.spec;
            out_csv = r.to_csv();
            for (const auto& w : r.warnings) log << "warning: " << w << "\n";
        }
    } else {
        if (!opt.descriptors) throw std::invalid_argument("spec " + opt.spec + " needs --descriptors");
        auto desc = stats::DataFrame::read_csv(opt.descriptors->string());
        if (opt.zeroshot && !desc.has("zero_shot_perf"))
            desc = join_zeroshot(desc, stats::DataFrame::read_csv(opt.zeroshot->string()));
        const auto r = stats::fit_ols_spec(desc, opt.spec);
        out_json = r.to_json();
        out_json["spec"] = opt.spec;
        out_csv = r.to_csv();
        for (const auto& w : r.warnings) log << "warning: " << w << "\n";
    }
    auto json_path = opt.out_prefix;
    json_path += ".json";
    auto csv_path = opt.out_prefix;
    csv_path += ".csv";
    atomic_write(json_path, out_json.dump(2) + "\n");
    atomic_write(csv_path, out_csv);
    log << "wrote " << json_path.string() << " and " << csv_path.string() << "\n";
}

nlohmann::json cmd_mds(const std::vector<std::string>& patterns, const std::filesystem::path& out_dir,
                       const MdsOptions& opt, std::ostream& log) {
    const auto files = expand_globs(patterns);
    if (files.empty()) throw std::invalid_argument("no trajectory files match (0 matches)");
    std::map<std::string, std::vector<LoadedTrajectory>> by_task;
    for (const auto& f : files) {
        auto lt = read_trajectory(f);
        by_task[lt.traj.task_id].push_back(std::move(lt));
    }

    nlohmann::json manifest = {{"tasks", nlohmann::json::object()}};
    for (auto& [task_id, runs] : by_task) {
        struct Point {
            std::string run_id;
            std::uint64_t id;
            int generation;
            double fitness;
            const Genome* genome;
        };
        std::vector<Point> points;
        std::vector<geometry::SampleItem> items;
        for (const auto& lt : runs)
            for (const auto& r : lt.traj.records) {
                if (!r.valid) continue;
                items.push_back({points.size(), lt.traj.operator_id, r.generation});
                points.push_back({lt.traj.run_id, r.id, r.generation, r.raw_fitness, &r.genome});
            }
        if (points.size() < 2) {
            log << task_id << ": fewer than 2 valid genomes, skipped\n";
            continue;
        }
        const auto base_ids = geometry::stratified_sample(items, opt.cap_per_bucket, opt.total_cap, opt.seed);
        std::vector<char> is_base(points.size(), 0);
        std::vector<Genome> ordered;
        for (auto b : base_ids) {
            is_base[b] = 1;
            ordered.push_back(*points[b].genome);
        }
        std::vector<std::size_t> others;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (!is_base[i]) {
                others.push_back(i);
                ordered.push_back(*points[i].genome);
            }
        const DistanceFn dist = runs.front().task->distance_over(ordered);
        const auto m = static_cast<Eigen::Index>(base_ids.size());
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j)
                d(i, j) = d(j, i) = dist(static_cast<std::size_t>(i), static_cast<std::size_t>(j));

        geometry::MdsConfig mc;
        mc.max_iter = opt.max_iter;
        mc.eps = opt.eps;
        mc.seed = opt.seed;
        const auto model = geometry::mds_fit(d, mc);

        std::vector<Eigen::VectorXd> coords(points.size());
        for (std::size_t r = 0; r < base_ids.size(); ++r)
            coords[base_ids[r]] = model.coords.row(static_cast<Eigen::Index>(r)).transpose();
        const std::size_t k = std::min<std::size_t>(opt.k, base_ids.size());
        std::vector<double> to_base(base_ids.size());
        for (std::size_t o = 0; o < others.size(); ++o) {
            for (std::size_t b = 0; b < base_ids.size(); ++b) to_base[b] = dist(base_ids.size() + o, b);
            coords[others[o]] = geometry::oos_place(to_base, model, k, opt.p);
        }

        std::vector<double> fitness;
        for (const auto& p : points) fitness.push_back(p.fitness);
        const auto fnorm = geometry::robust_normalize(fitness);
        std::string csv = "run_id,id,x,y,generation,fitness_norm,base\n";
        for (std::size_t i = 0; i < points.size(); ++i)
            csv += points[i].run_id + "," + std::to_string(points[i].id) + "," + num(coords[i](0)) + "," +
                   num(coords[i](1)) + "," + std::to_string(points[i].generation) + "," + num(fnorm[i]) + "," +
                   (is_base[i] ? "1" : "0") + "\n";
        const auto file = "mds_" + sanitize(task_id) + ".csv";
        atomic_write(out_dir / file, csv);
        manifest["tasks"][task_id] = {{"file", file},
                                      {"points", points.size()},
                                      {"base", base_ids.size()},
                                      {"stress", model.stress},
                                      {"iterations", model.iterations},
                                      {"max_iter", mc.max_iter},
                                      {"eps", mc.eps},
                                      {"seed", mc.seed}};
        log << task_id << ": " << points.size() << " points, base " << base_ids.size() << ", stress "
            << num(model.stress) << "\n";
    }
    atomic_write(out_dir / "mds_manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

ops::ZeroShotResult cmd_zeroshot(const ZeroShotOptions& opt, std::ostream& log) {
    if (opt.model.empty()) throw ConfigError("zeroshot: model is required");
    const auto task = make_task(opt.task);
    const ops::PromptLibrary prompts(opt.prompt_dir);
    llm::Gateway gateway(make_backend(opt.mock_replies));
    const std::string run_id = sanitize("zeroshot__" + task->id() + "__" + opt.model);
    auto result = ops::zero_shot_best_of_n(*task, gateway, prompts, opt.model, run_id);

    atomic_write(opt.out_dir / (run_id + ".json"), result.to_json().dump(2) + "\n");
    atomic_write(opt.out_dir / (run_id + ".ledger.jsonl"), ledger_jsonl(gateway.ledger().snapshot()));

    // zeroshot.csv keeps one row per (model, task); a rerun replaces its row.
    const auto table = opt.out_dir / "zeroshot.csv";
    stats::DataFrame df;
    std::vector<std::vector<std::string>> rows;
    if (std::filesystem::exists(table)) {
        const auto old = stats::DataFrame::read_csv(table.string());
        for (std::size_t i = 0; i < old.rows(); ++i)
            if (!(old.row(i)[0] == opt.model && old.row(i)[1] == task->id())) rows.push_back(old.row(i));
    }
    rows.push_back({opt.model, task->id(), num(result.best), result.all_invalid ? "1" : "0", num(result.samples.size())});
    for (const auto* c : {"model", "task", "zero_shot_perf", "all_invalid", "calls"}) df.add_column(c, {});
    for (auto& r : rows) df.append_row(std::move(r));
    atomic_write(table, df.to_csv());
    log << task->id() << " / " << opt.model << ": best " << num(result.best) << " over " << result.samples.size()
        << " calls" << (result.all_invalid ? " (all invalid)" : "") << "\n";
    return result;
}

std::string cmd_cost(const std::vector<std::filesystem::path>& ledgers, const std::filesystem::path& prices,
                     std::ostream& log) {
    if (ledgers.empty()) throw std::invalid_argument("cost: no ledger files given");
    const auto table = llm::PriceTable::from_file(prices.string());
    std::vector<llm::ChatExchange> exchanges;
    for (const auto& l : ledgers) {
        auto part = llm::read_ledger(l.string());
        exchanges.insert(exchanges.end(), part.begin(), part.end());
    }
    const auto report = llm::cost_report(exchanges, table);
    std::string csv = "run_id,model,exchanges,prompt_tokens,completion_tokens,cost,priced\n";
    for (const auto& line : report.lines)
        csv += line.run_id + "," + line.model + "," + num(line.exchanges) + "," + std::to_string(line.prompt_tokens) +
               "," + std::to_string(line.completion_tokens) + "," + (line.priced ? num(line.cost) : "") + "," +
               (line.priced ? "1" : "0") + "\n";
    csv += "TOTAL,,,,," + num(report.total) + ",\n";
    for (const auto& m : report.missing_prices) log << "warning: no price for model '" << m << "', excluded from total\n";
    return csv;
}

}  // namespace evoscope::workbench

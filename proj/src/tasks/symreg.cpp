#include "evoscope/tasks/symreg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace evoscope::symreg {

namespace {

double round_to(double v, double step) { return std::round(v / step) * step; }

std::string fmt(double v, const char* f) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

expr::EvalContext bind_rows(const std::vector<std::vector<double>>& rows, const std::vector<std::string>& variables) {
    expr::EvalContext ctx;
    for (std::size_t k = 0; k < variables.size(); ++k) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& r : rows) col.push_back(r[k]);
        ctx.bind(variables[k], std::move(col));
    }
    return ctx;
}

}  // namespace

Dataset Dataset::synthetic_oscillator(std::uint64_t seed, std::size_t samples, bool with_time) {
    if (samples == 0) throw std::invalid_argument("dataset needs at least one sample");
    Rng rng(derive_seed({seed, 0x6f7363696c6c6174ULL}));
    const double k = round_to(rng.uniform(0.5, 2.0), 0.001);
    const double c = round_to(rng.uniform(0.05, 0.5), 0.001);
    const double alpha = round_to(rng.uniform(0.1, 1.0), 0.001);
    const double force = with_time ? round_to(rng.uniform(0.2, 1.0), 0.001) : 0.0;

    Dataset ds;
    ds.seed = seed;
    ds.variables = with_time ? std::vector<std::string>{"t", "x", "v"} : std::vector<std::string>{"x", "v"};
    ds.ground_truth = "-" + fmt(k, "%.3f") + "*x - " + fmt(c, "%.3f") + "*v - " + fmt(alpha, "%.3f") + "*x^3";
    if (with_time) ds.ground_truth += " + " + fmt(force, "%.3f") + "*sin(t)";
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = rng.uniform(0.0, 10.0);
        const double x = rng.uniform(-2.0, 2.0);
        const double v = rng.uniform(-2.0, 2.0);
        double a = -k * x - c * v - alpha * x * x * x;
        if (with_time) {
            a += force * std::sin(t);
            ds.inputs.push_back({t, x, v});
        } else {
            ds.inputs.push_back({x, v});
        }
        ds.targets.push_back(a);
    }
    ds.build_probe_grid();
    return ds;
}

Dataset Dataset::from_json(const nlohmann::json& j) {
    Dataset ds;
    ds.variables = j.at("variables").get<std::vector<std::string>>();
    ds.inputs = j.at("inputs").get<std::vector<std::vector<double>>>();
    ds.targets = j.at("targets").get<std::vector<double>>();
    ds.seed = j.value("seed", std::uint64_t{0});
    ds.ground_truth = j.value("ground_truth", std::string{});
    if (j.contains("probe_grid"))
        ds.probe_grid = j.at("probe_grid").get<std::vector<std::vector<double>>>();
    else
        ds.build_probe_grid();
    ds.validate();
    return ds;
}

nlohmann::json Dataset::to_json() const {
    nlohmann::json j = {{"variables", variables}, {"inputs", inputs}, {"targets", targets},
                        {"probe_grid", probe_grid}, {"seed", seed}};
    if (!ground_truth.empty()) j["ground_truth"] = ground_truth;
    return j;
}

void Dataset::build_probe_grid() {
    const std::size_t d = variables.size();
    std::vector<double> lo(d, 0.0), hi(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        const auto col = column(k);
        lo[k] = *std::min_element(col.begin(), col.end());
        hi[k] = *std::max_element(col.begin(), col.end());
    }
    Rng rng(derive_seed({seed, 0x70726f6265ULL}));
    probe_grid.assign(kProbePoints, std::vector<double>(d, 0.0));
    for (auto& row : probe_grid)
        for (std::size_t k = 0; k < d; ++k) row[k] = rng.uniform(lo[k], hi[k]);
}

std::vector<double> Dataset::column(std::size_t k) const {
    std::vector<double> col;
    col.reserve(inputs.size());
    for (const auto& r : inputs) col.push_back(r.at(k));
    return col;
}

void Dataset::validate() const {
    if (variables.empty()) throw std::invalid_argument("dataset declares no variables");
    if (inputs.empty()) throw std::invalid_argument("dataset needs at least one sample");
    if (inputs.size() != targets.size()) throw std::invalid_argument("inputs and targets differ in length");
    for (const auto& r : inputs)
        if (r.size() != variables.size()) throw std::invalid_argument("input row width differs from variable count");
    for (const auto& r : probe_grid)
        if (r.size() != variables.size()) throw std::invalid_argument("probe row width differs from variable count");
}

double mse(const expr::Expression& e, const Dataset& ds) {
    const auto pred = expr::evaluate(e, bind_rows(ds.inputs, ds.variables));
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!std::isfinite(pred[i])) return kSentinelMse;
        const double r = pred[i] - ds.targets[i];
        total += r * r;
    }
    const double m = total / static_cast<double>(pred.size());
    if (!std::isfinite(m) || m >= kSentinelMse) return kSentinelMse;
    return m;
}

std::vector<double> normalized_fitness(std::span<const double> mses) {
    if (mses.empty()) return {};
    const auto [lo, hi] = std::minmax_element(mses.begin(), mses.end());
    std::vector<double> out;
    out.reserve(mses.size());
    const double range = *hi - *lo;
    for (double m : mses) out.push_back(range > 0.0 ? 1.0 - (m - *lo) / range : 1.0);
    return out;
}

std::vector<double> probe_outputs(const expr::Expression& e, const std::vector<std::vector<double>>& probe,
                                  const std::vector<std::string>& variables) {
    auto out = expr::evaluate(e, bind_rows(probe, variables));
    for (auto& v : out)
        if (!std::isfinite(v)) v = 0.0;
    return out;
}

double behavior_distance(const expr::Expression& a, const expr::Expression& b,
                         const std::vector<std::vector<double>>& probe, const std::vector<std::string>& variables) {
    return cosine_distance(probe_outputs(a, probe, variables), probe_outputs(b, probe, variables));
}

SymregTask::SymregTask(Dataset ds, std::string id) : ExpressionTask(ds.variables), ds_(std::move(ds)), id_(std::move(id)) {
    ds_.validate();
    if (ds_.probe_grid.empty()) ds_.build_probe_grid();
    if (id_.empty()) id_ = std::string(ds_.variables.size() > 2 ? "symreg-osc2" : "symreg-osc1") + "-s" + std::to_string(ds_.seed);
}

std::vector<Genome> SymregTask::initial_population(std::size_t n_init) const {
    Rng rng(derive_seed({ds_.seed, 0x73796d2d696e6974ULL}));
    std::vector<Genome> out;
    std::set<std::string> seen;
    for (std::size_t tries = 0; out.size() < n_init && tries < 1000 * (n_init + 1); ++tries) {
        const expr::Expression e = expr::normalize(expr::Expression(random_expression(rng, variables(), 3)), variable_set());
        if (mse(e, ds_) >= kSentinelMse) continue;
        if (!seen.insert(expr::canonicalize(e)).second) continue;
        out.emplace_back(e);
    }
    return out;
}

Evaluation SymregTask::evaluate(const Genome& g) const {
    const expr::Expression* e = as_expression(g);
    if (!e || e->empty()) return {false, invalid_fitness()};
    double m;
    try {
        m = mse(*e, ds_);
    } catch (const expr::UnboundVariable&) {
        return {false, invalid_fitness()};
    }
    if (m >= kSentinelMse) return {false, invalid_fitness()};
    return {true, -m};
}

nlohmann::json SymregTask::instance_json() const {
    return {{"family", "symreg"}, {"id", id_}, {"instance", ds_.to_json()}};
}

std::map<std::string, std::string> SymregTask::prompt_fields(PromptMode mode) const {
    std::string vars;
    for (const auto& v : variables()) vars += (vars.empty() ? "" : ", ") + v;
    nlohmann::json samples = nlohmann::json::array();
    const std::size_t shown = std::min<std::size_t>(100, ds_.inputs.size());
    for (std::size_t i = 0; i < shown; ++i) {
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t k = 0; k < variables().size(); ++k) row[variables()[k]] = round_to(ds_.inputs[i][k], 0.001);
        row["a"] = round_to(ds_.targets[i], 0.001);
        samples.push_back(std::move(row));
    }
    std::string desc = mode == PromptMode::ZeroShot
                           ? "This is a symbolic regression task for a damped nonlinear oscillator. Given (" + vars +
                                 ") and acceleration a, find a mathematical expression a = f(" + vars +
                                 ") that fits the data as accurately as possible."
                           : "Symbolic regression for damped nonlinear oscillator. Find a = f(" + vars + ").";
    return {{"task_desc", desc}, {"question", samples.dump()}, {"variables", vars}, {"n", std::to_string(variables().size())}};
}

std::string SymregTask::format_parent(const Genome& g, double raw_fitness) const {
    return "{\"code\": " + nlohmann::json(serialize(g)).dump() + ", \"mse_score\": " + fmt(-raw_fitness, "%.6g") + "}";
}

std::vector<std::vector<double>> SymregTask::behavior(const expr::Expression& e) const {
    return {probe_outputs(e, ds_.probe_grid, variables())};
}

}  // namespace evoscope::symreg

#pragma once

// Synthetic descriptor tables with a planted effect, plus an independent
// construction of the named OLS spec designs.

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evoscope/core/rng.hpp"
#include "evoscope/stats/stats.hpp"
#include "support/oracles.hpp"

namespace stats_fixture {

using evoscope::Rng;
using evoscope::stats::DataFrame;

inline std::vector<double> z_of(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / (v.size() - 1));
    std::vector<double> out;
    for (double x : v) out.push_back((x - m) / sd);
    return out;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Descriptor table: 6 models × 3 tasks × 2 repetitions with a planted
/// breakthrough-rate effect on final fitness and task-specific scales.
inline DataFrame planted_descriptors(std::uint64_t seed) {
    Rng rng(seed);
    DataFrame df;
    for (const char* c : {"model", "task", "best_final_fitness", "breakthrough_rate", "avg_novelty", "initial_nov",
                          "zero_shot_perf"})
        df.add_column(c, {});
    const std::vector<std::string> tasks = {"binpack", "symreg", "tsp"};
    const std::vector<double> scale = {3.0, 0.01, 200.0};
    for (int m = 0; m < 6; ++m) {
        const double skill = rng.normal();
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const double zs = skill * scale[t] + rng.normal(0, 0.3) * scale[t];
            for (int r = 0; r < 2; ++r) {
                const double br = 0.05 + 0.02 * skill + rng.normal(0, 0.005);
                const double nov = rng.uniform(0.1, 0.6);
                const double fit = scale[t] * (1.5 * br / 0.02 + rng.normal(0, 0.5));
                df.append_row({"model" + std::to_string(m), tasks[t], fmt(fit), fmt(br), fmt(nov),
                               fmt(nov + rng.normal(0, 0.05)), fmt(zs)});
            }
        }
    }
    return df;
}

/// Independent construction of a spec's design: cell means, within-task
/// response z, table-wide predictor z (zero_shot_perf within task), task dummies.
inline std::vector<double> oracle_ols_spec(const DataFrame& df, const std::vector<std::string>& preds) {
    std::map<std::pair<std::string, std::string>, std::vector<std::vector<double>>> cells;
    const auto model = df.text("model"), task = df.text("task");
    std::vector<std::vector<double>> cols = {df.numeric("best_final_fitness")};
    for (const auto& p : preds) cols.push_back(df.numeric(p));
    for (std::size_t i = 0; i < model.size(); ++i) {
        std::vector<double> row;
        for (const auto& c : cols) row.push_back(c[i]);
        cells[{model[i], task[i]}].push_back(row);
    }
    std::vector<std::string> tcol;
    std::vector<std::vector<double>> mean(cols.size());
    for (const auto& [key, rows] : cells) {
        tcol.push_back(key.second);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double s = 0;
            for (const auto& r : rows) s += r[k];
            mean[k].push_back(s / rows.size());
        }
    }
    auto within = [&](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        for (const auto& t : std::set<std::string>(tcol.begin(), tcol.end())) {
            std::vector<double> sub;
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < v.size(); ++i)
                if (tcol[i] == t) {
                    sub.push_back(v[i]);
                    idx.push_back(i);
                }
            const auto z = z_of(sub);
            for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = z[k];
        }
        return out;
    };
    const auto y = within(mean[0]);
    std::vector<std::vector<double>> zs;
    for (std::size_t k = 0; k < preds.size(); ++k)
        zs.push_back(preds[k] == "zero_shot_perf" ? within(mean[k + 1]) : z_of(mean[k + 1]));
    const std::set<std::string> levels(tcol.begin(), tcol.end());
    std::vector<std::vector<double>> x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        std::vector<double> row = {1.0};
        for (const auto& z : zs) row.push_back(z[i]);
        for (auto it = std::next(levels.begin()); it != levels.end(); ++it) row.push_back(tcol[i] == *it ? 1.0 : 0.0);
        x.push_back(row);
    }
    return oracle::normal_equations(x, y);
}

}  // namespace stats_fixture

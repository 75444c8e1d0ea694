#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They deliberately avoid the library's own helpers: straight scans,
// plain loops and hand-rolled linear algebra.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "evoscope/core/evolution.hpp"
#include "evoscope/core/rng.hpp"

namespace oracle {

/// Shortest closed tour by enumerating every permutation with city 0 fixed.
inline double tsp_optimum(const std::vector<std::vector<double>>& dist) {
    const int n = static_cast<int>(dist.size());
    std::vector<int> rest(n - 1);
    std::iota(rest.begin(), rest.end(), 1);
    double best = std::numeric_limits<double>::infinity();
    do {
        double len = dist[0][rest.front()] + dist[rest.back()][0];
        for (int i = 0; i + 1 < n - 1; ++i) len += dist[rest[i]][rest[i + 1]];
        best = std::min(best, len);
    } while (std::next_permutation(rest.begin(), rest.end()));
    return best;
}

/// Synthetic trajectory whose records carry 2-D points; distances are
/// Euclidean between those points. Record id equals record index.
struct SyntheticRun {
    evoscope::Trajectory traj;
    std::vector<std::pair<double, double>> points;

    double dist(std::size_t a, std::size_t b) const {
        const double dx = points[a].first - points[b].first;
        const double dy = points[a].second - points[b].second;
        return std::sqrt(dx * dx + dy * dy);
    }
};

inline SyntheticRun synthetic_run(std::uint64_t seed, std::size_t n_init, std::size_t generations,
                                  std::size_t per_generation, double invalid_rate = 0.15) {
    evoscope::Rng rng(seed);
    SyntheticRun s;
    s.traj.run_id = "synthetic-" + std::to_string(seed);
    s.traj.task_id = "synthetic";
    s.traj.operator_id = "synthetic-op";
    s.traj.config.n_init = n_init;
    s.traj.config.generations = generations;
    s.traj.config.offspring_per_generation = per_generation;
    auto push = [&](int gen, bool valid, double fit, std::vector<std::uint64_t> parents) {
        evoscope::Individual ind;
        ind.id = s.traj.records.size();
        ind.generation = gen;
        ind.valid = valid;
        ind.raw_fitness = valid ? fit : -1e9;
        ind.parent_ids = std::move(parents);
        ind.operator_tag = "synthetic-op";
        s.traj.records.push_back(ind);
        s.points.emplace_back(rng.uniform(0, 10), rng.uniform(0, 10));
    };
    for (std::size_t i = 0; i < n_init; ++i) push(0, true, rng.normal(), {});
    s.traj.initial_count = n_init;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& r : s.traj.records) best = std::max(best, r.raw_fitness);
    s.traj.best_so_far.push_back(best);
    for (std::size_t g = 1; g <= generations; ++g) {
        // Parents come from valid records of earlier generations.
        std::vector<std::uint64_t> eligible;
        for (const auto& r : s.traj.records)
            if (r.valid && r.generation < static_cast<int>(g)) eligible.push_back(r.id);
        for (std::size_t k = 0; k < per_generation; ++k) {
            std::vector<std::uint64_t> parents;
            const std::size_t np = 1 + rng.index(3);
            for (std::size_t p = 0; p < np; ++p) parents.push_back(eligible[rng.index(eligible.size())]);
            const bool valid = !rng.bernoulli(invalid_rate);
            // Fitness drifts upward slowly so breakthroughs keep happening.
            const double fit = rng.normal(0.02 * static_cast<double>(g), 1.0);
            push(static_cast<int>(g), valid, fit, parents);
            if (valid) best = std::max(best, fit);
        }
        s.traj.best_so_far.push_back(best);
    }
    return s;
}

/// Quadratic scan: for each valid attempt, the minimum distance over every
/// valid record of a strictly earlier generation.
template <typename Dist>
std::vector<std::optional<double>> novelty(const evoscope::Trajectory& t, Dist d) {
    std::vector<std::optional<double>> out;
    for (std::size_t i = t.initial_count; i < t.records.size(); ++i) {
        if (!t.records[i].valid) {
            out.emplace_back();
            continue;
        }
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < t.records.size(); ++j)
            if (t.records[j].valid && t.records[j].generation < t.records[i].generation) m = std::min(m, d(i, j));
        out.emplace_back(m);
    }
    return out;
}

inline double lrr(const evoscope::Trajectory& t) {
    double valid = 0, hits = 0;
    for (std::size_t i = t.initial_count; i < t.records.size(); ++i) {
        const auto& c = t.records[i];
        if (!c.valid) continue;
        valid += 1;
        bool beats_all = true;
        for (auto pid : c.parent_ids)
            for (const auto& r : t.records)
                if (r.id == pid && !(c.raw_fitness > r.raw_fitness)) beats_all = false;
        if (beats_all) hits += 1;
    }
    return valid > 0 ? hits / valid : 0.0;
}

template <typename Dist>
double pcd(const evoscope::Trajectory& t, Dist d) {
    double total = 0.0, count = 0.0;
    for (std::size_t i = t.initial_count; i < t.records.size(); ++i) {
        const auto& c = t.records[i];
        if (!c.valid) continue;
        double s = 0.0;
        for (auto pid : c.parent_ids) s += d(i, static_cast<std::size_t>(pid));
        total += s / static_cast<double>(c.parent_ids.size());
        count += 1;
    }
    return count > 0 ? total / count : 0.0;
}

/// Attempt indices whose fitness strictly beats every earlier valid record.
inline std::vector<std::size_t> breakthrough_events(const evoscope::Trajectory& t) {
    std::vector<std::size_t> out;
    for (std::size_t i = t.initial_count; i < t.records.size(); ++i) {
        if (!t.records[i].valid) continue;
        bool top = true;
        for (std::size_t j = 0; j < i; ++j)
            if (t.records[j].valid && t.records[j].raw_fitness >= t.records[i].raw_fitness) top = false;
        if (top) out.push_back(i - t.initial_count);
    }
    return out;
}

/// Solves (XᵀX) β = Xᵀy by Gaussian elimination with partial pivoting.
/// X is row-major, n × p.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
    const std::size_t n = x.size(), p = x.front().size();
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < p; ++r) {
            for (std::size_t c = 0; c < p; ++c) a[r][c] += x[i][r] * x[i][c];
            a[r][p] += x[i][r] * y[i];
        }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t r = 0; r < p; ++r) beta[r] = a[r][p] / a[r][r];
    return beta;
}

/// Kernel entropy straight from the definition.
inline double entropy(const std::vector<std::vector<double>>& d, const std::vector<double>& w, double sigma) {
    const std::size_t n = d.size();
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += w[j] * std::exp(-d[i][j] * d[i][j] / (2 * sigma * sigma));
    double z = 0;
    for (double v : g) z += v;
    double h = 0;
    for (double v : g)
        if (v > 0) h -= (v / z) * std::log(v / z);
    return h;
}

/// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (static_cast<double>(i + j) / 2.0) + 1.0;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson(ranks(a), ranks(b));
}

}  // namespace oracle

#include "evoscope/geometry/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "evoscope/core/rng.hpp"

namespace evoscope::geometry {

namespace {

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& x) {
    const Eigen::Index m = x.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) out(i, j) = out(j, i) = (x.row(i) - x.row(j)).norm();
    return out;
}

void check_dissimilarities(const Eigen::MatrixXd& d) {
    if (d.rows() != d.cols()) throw std::invalid_argument("distance matrix must be square");
    if (d.rows() < 2) throw std::invalid_argument("MDS needs at least 2 points");
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (d(i, i) != 0.0) throw std::invalid_argument("distance matrix diagonal must be zero");
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            if (!std::isfinite(d(i, j)) || d(i, j) < 0.0)
                throw std::invalid_argument("distance matrix entries must be finite and non-negative");
            if (std::abs(d(i, j) - d(j, i)) > 1e-12 * std::max(1.0, std::abs(d(i, j))))
                throw std::invalid_argument("distance matrix must be symmetric");
        }
    }
}

}  // namespace

double raw_stress(const Eigen::MatrixXd& d, const Eigen::MatrixXd& coords) {
    const Eigen::MatrixXd dh = pairwise(coords);
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = i + 1; j < d.cols(); ++j) s += (d(i, j) - dh(i, j)) * (d(i, j) - dh(i, j));
    return s;
}

MdsModel mds_fit(const Eigen::MatrixXd& d, const MdsConfig& cfg) {
    check_dissimilarities(d);
    if (cfg.dims < 1 || cfg.max_iter < 0) throw std::invalid_argument("invalid MDS config");
    const Eigen::Index m = d.rows();
    MdsModel model;
    model.config = cfg;

    Rng rng(cfg.seed);
    Eigen::MatrixXd x(m, cfg.dims);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k < cfg.dims; ++k) x(i, k) = rng.normal();

    double stress = raw_stress(d, x);
    model.stress_history.push_back(stress);
    for (int it = 0; it < cfg.max_iter; ++it) {
        const Eigen::MatrixXd dh = pairwise(x);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j)
                if (i != j && dh(i, j) > 0.0) b(i, j) = -d(i, j) / dh(i, j);
            b(i, i) = -b.row(i).sum();
        }
        x = b * x / static_cast<double>(m);
        const double next = raw_stress(d, x);
        model.stress_history.push_back(next);
        model.iterations = it + 1;
        const double prev = stress;
        stress = next;
        if (stress <= 0.0 || prev - stress < cfg.eps * prev) break;
    }
    model.coords = std::move(x);
    model.stress = stress;
    return model;
}

Eigen::VectorXd oos_place(std::span<const double> d_to_base, const MdsModel& model, std::size_t k, double p) {
    const auto m = static_cast<std::size_t>(model.coords.rows());
    if (d_to_base.size() != m) throw std::invalid_argument("distance vector does not match the base size");
    if (k == 0 || k > m) throw std::invalid_argument("k must lie in [1, base size]");
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d_to_base[a] < d_to_base[b]; });

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.coords.cols());
    double wsum = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = idx[r];
        const double w = 1.0 / std::pow(d_to_base[i] + 1e-8, p);
        acc += w * model.coords.row(static_cast<Eigen::Index>(i)).transpose();
        wsum += w;
    }
    return acc / wsum;
}

std::vector<std::uint64_t> stratified_sample(std::span<const SampleItem> items, std::size_t cap_per_bucket,
                                             std::size_t total_cap, std::uint64_t seed) {
    std::vector<std::uint64_t> out;
    if (items.size() <= total_cap) {
        for (const auto& it : items) out.push_back(it.id);
    } else {
        std::map<std::pair<std::string, int>, std::vector<std::uint64_t>> buckets;
        for (const auto& it : items) buckets[{it.bucket_operator, it.generation}].push_back(it.id);
        Rng rng(seed);
        for (auto& [key, ids] : buckets) {
            if (ids.size() > cap_per_bucket) {
                rng.shuffle(ids);
                ids.resize(cap_per_bucket);
            }
            out.insert(out.end(), ids.begin(), ids.end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> robust_normalize(std::span<const double> values, double lo_pct, double hi_pct) {
    if (values.empty()) return {};
    const std::vector<double> v(values.begin(), values.end());
    const double lo = percentile(v, lo_pct), hi = percentile(v, hi_pct);
    std::vector<double> out;
    out.reserve(values.size());
    for (double x : values) out.push_back(hi > lo ? std::clamp((x - lo) / (hi - lo), 0.0, 1.0) : 0.0);
    return out;
}

}  // namespace evoscope::geometry

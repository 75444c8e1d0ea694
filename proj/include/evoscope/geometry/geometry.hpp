#pragma once

/// @file geometry.hpp
/// @brief 2-D landscapes: SMACOF metric MDS on precomputed distances,
/// k-NN Shepard placement of out-of-sample points, stratified base sampling.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace evoscope::geometry {

struct MdsConfig {
    int dims = 2;
    int max_iter = 300;
    /// Stops when (stress_prev - stress) < eps · stress_prev.
    double eps = 1e-3;
    std::uint64_t seed = 0;
};

struct MdsModel {
    Eigen::MatrixXd coords;            // m × dims
    double stress = 0.0;               // Σ_{i<j} (D_ij - d̂_ij)²
    int iterations = 0;
    std::vector<double> stress_history;  // stress of the start and after every iteration
    MdsConfig config;
};

/// Raw stress of a configuration against D.
double raw_stress(const Eigen::MatrixXd& d, const Eigen::MatrixXd& coords);

/// SMACOF (Guttman transform) from i.i.d. standard normal start coordinates.
/// Throws std::invalid_argument unless D is square, symmetric, non-negative
/// with a zero diagonal and at least 2×2.
MdsModel mds_fit(const Eigen::MatrixXd& d, const MdsConfig& cfg = {});

/// Inverse-distance weighted mean of the k nearest base coordinates with
/// weights 1 / (d + 1e-8)^p. Ties in distance resolve to the lower index.
Eigen::VectorXd oos_place(std::span<const double> d_to_base, const MdsModel& model, std::size_t k = 8,
                          double p = 2.0);

struct SampleItem {
    std::uint64_t id = 0;
    std::string bucket_operator;
    int generation = 0;
};

/// Returns every id when there are at most `total_cap`; otherwise a uniform
/// sample without replacement of at most `cap_per_bucket` ids per
/// (operator, generation) bucket. Output is sorted by id.
std::vector<std::uint64_t> stratified_sample(std::span<const SampleItem> items, std::size_t cap_per_bucket = 60,
                                             std::size_t total_cap = 4000, std::uint64_t seed = 0);

/// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

/// Min-max scaling between the 1st and 99th percentiles, clipped to [0, 1].
std::vector<double> robust_normalize(std::span<const double> values, double lo_pct = 1.0, double hi_pct = 99.0);

}  // namespace evoscope::geometry

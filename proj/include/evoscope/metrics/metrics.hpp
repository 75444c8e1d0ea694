#pragma once

/// @file metrics.hpp
/// @brief Trajectory descriptors: novelty, breakthroughs, local refinement
/// rate, parent-child distance and kernel-density entropies.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoscope/core/evolution.hpp"

namespace evoscope::metrics {

/// Task distance between two trajectory records, addressed by record index.
/// Only valid records may be passed.
using RecordDistance = std::function<double(std::size_t, std::size_t)>;

/// Wraps task.distance_over() for the valid records of `traj`.
RecordDistance record_distance(const Trajectory& traj, const Task& task);

inline constexpr double kNormalizeEpsilon = 1e-9;

/// min over `prior` of d(candidate, b). Throws std::invalid_argument on an empty prior set.
double novelty(std::size_t candidate, std::span<const std::size_t> prior, const RecordDistance& d);

/// Raw novelty of every offspring attempt, aligned with traj.attempts().
/// The prior set of a generation-t attempt is every valid record of
/// generations < t (the initial population included). Invalid attempts get
/// no value.
std::vector<std::optional<double>> raw_novelty(const Trajectory& traj, const RecordDistance& d);

/// (x - min) / (max - min + eps) over all raw values of one problem instance.
std::vector<double> normalize_novelty(std::span<const double> raws, double eps = kNormalizeEpsilon);

struct BreakthroughResult {
    std::vector<std::size_t> events;  // indices into traj.attempts()
    std::size_t attempts = 0;
    std::size_t valid_attempts = 0;
    double rate = 0.0;  // events / attempts, or / valid_attempts with valid_only
};

/// An attempt is an event when it is valid and its fitness strictly exceeds
/// every valid fitness seen before it in the run, initial population included.
BreakthroughResult breakthroughs(const Trajectory& traj, bool valid_only = false);

/// Fraction of valid attempts strictly fitter than the best of their prompted parents.
double local_refinement_rate(const Trajectory& traj);

/// Per valid attempt, mean task distance to its prompted parents (with
/// multiplicity); averaged over valid attempts. 0 when no attempt is valid.
double parent_child_distance(const Trajectory& traj, const RecordDistance& d);

class UndefinedEntropy : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Row-major symmetric distance matrix.
using DistanceMatrix = std::vector<std::vector<double>>;

/// H = -Σ q_i log q_i with g_i = Σ_j w_j exp(-D_ij² / (2σ²)), q = g / Σ g.
/// Throws UndefinedEntropy when every weight is zero or σ ≤ 0.
double spatial_entropy(const DistanceMatrix& d, std::span<const double> weights, double sigma);

/// Median of the positive pairwise distances (i < j); 1 when there are none.
double median_bandwidth(const DistanceMatrix& d);

/// Per-member weights for H_fitness: min-max normalized fitness, all 1 when
/// the fitness values are equal.
std::vector<double> fitness_weights(std::span<const double> fitness);

struct GenerationSummary {
    std::string run_id;
    std::string task_id;
    std::string operator_id;
    int generation = 0;
    std::size_t offspring_attempts = 0;
    std::size_t valid_attempts = 0;
    std::size_t breakthrough_count = 0;
    double prob_breakthrough = 0.0;  // breakthrough_count / offspring_attempts
    double mean_novelty = 0.0;       // normalized, over valid attempts of the generation
    double max_novelty = 0.0;
    double h_spatial = 0.0;          // end-of-generation pool
    double h_fitness = 0.0;
    double sigma = 1.0;
    std::size_t pool_size = 0;
    double best_so_far = 0.0;
};

/// One summary per generation t ≥ 1. `normalized_novelty` is aligned with
/// traj.attempts().
std::vector<GenerationSummary> summarize_generations(const Trajectory& traj, const Task& task,
                                                     std::span<const std::optional<double>> normalized_novelty);

struct RunDescriptors {
    std::string run_id;
    std::string task_id;
    std::string operator_id;
    std::uint64_t seed = 0;
    std::size_t attempts = 0;
    std::size_t valid_attempts = 0;
    double breakthrough_rate = 0.0;
    double lrr = 0.0;
    double pcd = 0.0;
    double avg_novelty = 0.0;   // mean normalized novelty over valid attempts
    double initial_nov = 0.0;   // mean normalized novelty of generation 1
    double best_final_fitness = 0.0;
    double initial_best_fitness = 0.0;
};

RunDescriptors describe_run(const Trajectory& traj, const RecordDistance& d,
                            std::span<const std::optional<double>> normalized_novelty);

}  // namespace evoscope::metrics

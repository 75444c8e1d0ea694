#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoscope/core/operator.hpp"
#include "evoscope/core/rng.hpp"
#include "evoscope/tasks/task.hpp"

namespace evoscope {

struct Individual {
    std::uint64_t id = 0;        // creation order within the run
    Genome genome;               // meaningful only when valid
    std::string serialized;      // canonical when valid; raw candidate text otherwise
    double raw_fitness = 0.0;
    int generation = 0;
    std::vector<std::uint64_t> parent_ids;
    bool valid = false;
    std::string operator_tag;
    std::string failure;
    std::optional<std::size_t> exchange_index;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SelectionImpossible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvolutionConfig {
    std::size_t n_init = 40;
    double elite_fraction = 0.2;     // q
    std::size_t parents_per_prompt = 3;
    std::size_t offspring_per_generation = 10;
    std::size_t capacity = 40;       // N
    std::size_t generations = 30;    // G
    std::uint64_t seed = 21;
    std::string task_id;
    std::string operator_id;
    /// Offspring requests dispatched concurrently within one generation.
    std::size_t max_in_flight = 1;

    /// Throws ConfigError naming every offending field.
    void validate() const;
};

/// ⌈q·m⌉, at least 1.
std::size_t elite_size(double q, std::size_t members);

/// Capacity-limited, deduplicated population ranked by fitness (ties: earlier id first).
class PopulationPool {
public:
    explicit PopulationPool(std::size_t capacity) : capacity_(capacity) {}

    const std::vector<Individual>& members() const noexcept { return members_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    /// Maximum valid fitness ever observed; -inf before the first valid entry.
    double best_so_far() const noexcept { return best_so_far_; }
    bool contains(const std::string& serialized) const;

    /// Top ⌈q·|members|⌉ members by rank.
    std::vector<Individual> elite(double q) const;

    /// Drops duplicates (against members and earlier offspring) and invalid
    /// offspring, merges, truncates to capacity by rank.
    void merge(std::span<const Individual> offspring);

private:
    std::size_t capacity_;
    std::vector<Individual> members_;
    double best_so_far_ = -std::numeric_limits<double>::infinity();
};

PopulationPool update_pool(PopulationPool pool, std::span<const Individual> offspring);

/// Samples cfg.parents_per_prompt elite members with replacement, with
/// probability proportional to raw_fitness - min_elite + 1e-9. Invalid members
/// are never drawn. Throws SelectionImpossible when no valid member exists.
std::vector<Individual> select_parents(const PopulationPool& pool, const EvolutionConfig& cfg, Rng& rng);

/// Shift added to elite fitness before proportional sampling.
inline constexpr double kSelectionEpsilon = 1e-9;

struct Trajectory {
    std::string run_id;
    std::string task_id;
    std::string operator_id;
    EvolutionConfig config;
    std::vector<Individual> records;    // initial population first, then every offspring attempt
    std::size_t initial_count = 0;
    std::vector<double> best_so_far;    // index t: after generation t (t = 0 is the initial pool)

    std::span<const Individual> initial() const { return {records.data(), initial_count}; }
    std::span<const Individual> attempts() const {
        return {records.data() + initial_count, records.size() - initial_count};
    }
};

/// Replays pool updates from a trajectory's records; index t holds the pool
/// after generation t.
std::vector<PopulationPool> replay_pools(const Trajectory& traj);

/// Seed of the private stream for one offspring attempt.
std::uint64_t attempt_seed(std::uint64_t run_seed, std::size_t generation, std::size_t attempt);

Trajectory run_evolution(const EvolutionConfig& cfg, const Task& task, const MutationOperator& op);

}  // namespace evoscope

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoscope/tasks/task.hpp"

namespace evoscope::tsp {

/// Symmetric distance matrix with zero diagonal. Triangle inequality is not assumed.
struct Instance {
    int n = 0;
    std::vector<std::vector<double>> dist;
    std::uint64_t seed = 0;

    /// Random Euclidean instance: n points uniform in [0, 100)^2.
    static Instance random(int n, std::uint64_t seed);
    static Instance from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// Throws std::invalid_argument on asymmetry, negative entries or a nonzero diagonal.
    void validate() const;
};

bool is_permutation(const Tour& t, int n);

/// Closed tour length. Throws InvalidGenome if the tour is not a permutation of 0..n-1.
double tour_length(const Tour& t, const Instance& inst);

/// -L(tour). Throws InvalidGenome for non-permutations.
double fitness(const Tour& t, const Instance& inst);

/// Sorted undirected edge keys (min*n + max) of a closed tour.
std::vector<std::int64_t> edge_keys(const Tour& t);

/// 1 - |E(a) ∩ E(b)| / |E(a)|. Throws std::invalid_argument on mismatched sizes.
double edge_distance(const Tour& a, const Tour& b);

/// Rotation to start at city 0, direction chosen so the second city is the
/// smaller of 0's two neighbours.
Tour canonical(const Tour& t);

/// Reverses order[i..j] inclusive (a 2-opt move).
Tour two_opt_move(const Tour& t, std::size_t i, std::size_t j);

/// Change in tour length from two_opt_move(t, i, j), computed in O(1).
double two_opt_delta(const Tour& t, const Instance& inst, std::size_t i, std::size_t j);

/// Exhaustive optimum over all (n-1)!/2 tours. For small n only.
double brute_force_optimum(const Instance& inst);

class TspTask final : public Task {
public:
    TspTask(Instance inst, std::string id = {});

    TaskFamily family() const override { return TaskFamily::Tsp; }
    const std::string& id() const override { return id_; }
    const Instance& instance() const { return inst_; }
    int n() const { return inst_.n; }

    std::vector<Genome> initial_population(std::size_t n_init) const override;
    Evaluation evaluate(const Genome& g) const override;
    double invalid_fitness() const override { return invalid_fitness_; }
    std::string serialize(const Genome& g) const override;
    Genome deserialize(std::string_view text) const override;
    double distance(const Genome& a, const Genome& b) const override;
    DistanceFn distance_over(std::span<const Genome> genomes) const override;
    nlohmann::json instance_json() const override;
    std::map<std::string, std::string> prompt_fields(PromptMode mode) const override;
    std::string format_parent(const Genome& g, double raw_fitness) const override;

private:
    Instance inst_;
    std::string id_;
    double invalid_fitness_;
};

}  // namespace evoscope::tsp

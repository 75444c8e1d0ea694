#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evoscope/tasks/genome.hpp"

namespace evoscope {

enum class TaskFamily { Tsp, Symreg, Binpack };

std::string_view to_string(TaskFamily f);
TaskFamily task_family_from_string(std::string_view s);

/// Genome failed a task validity check (non-permutation, unparsable text, ...).
class InvalidGenome : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Evaluation {
    bool valid = false;
    double raw_fitness = 0.0;  // higher is better
};

enum class PromptMode { ZeroShot, Evolve };

/// Pairwise distance over indices into a fixed genome list.
using DistanceFn = std::function<double(std::size_t, std::size_t)>;

/// A problem instance of one task family.
///
/// Implementations are immutable after construction; every const member is
/// safe to call concurrently.
class Task {
public:
    virtual ~Task() = default;

    virtual TaskFamily family() const = 0;
    /// Instance identifier, stable for a given instance definition.
    virtual const std::string& id() const = 0;

    /// The task's fixed initial population. Identical for every operator
    /// given the same instance.
    virtual std::vector<Genome> initial_population(std::size_t n_init) const = 0;

    /// Fitness in task units, oriented so higher is better. Invalid genomes
    /// return {false, invalid_fitness()}.
    virtual Evaluation evaluate(const Genome& g) const = 0;
    /// Sentinel assigned to invalid genomes; strictly below every valid fitness.
    virtual double invalid_fitness() const = 0;

    /// Canonical serialization; equal strings mean duplicate genomes.
    virtual std::string serialize(const Genome& g) const = 0;
    /// Inverse of serialize. Throws InvalidGenome.
    virtual Genome deserialize(std::string_view text) const = 0;
    /// Canonical representative of g: deserialize(serialize(g)).
    Genome normalize(const Genome& g) const { return deserialize(serialize(g)); }

    /// Task-specific semantic distance D_T.
    virtual double distance(const Genome& a, const Genome& b) const = 0;
    /// Distance over a genome list, free to precompute per-genome features.
    virtual DistanceFn distance_over(std::span<const Genome> genomes) const;

    /// Self-contained description from which make_task() rebuilds this instance.
    virtual nlohmann::json instance_json() const = 0;

    /// Placeholder values for prompt templates ({task_desc}, {question}, {n}, ...).
    virtual std::map<std::string, std::string> prompt_fields(PromptMode mode) const = 0;
    /// One parent line for the evolution prompt, in the task's presentation
    /// (e.g. tour length, lower is better, for TSP).
    virtual std::string format_parent(const Genome& g, double raw_fitness) const = 0;
};

/// Builds a task from a config block or from Task::instance_json().
///
/// Accepted shapes: {"family":"tsp","n":8,"seed":21},
/// {"family":"tsp","instance_file":"..."}, {"family":"tsp","instance":{...}}
/// and the analogous symreg / binpack blocks.
std::unique_ptr<Task> make_task(const nlohmann::json& config);

}  // namespace evoscope

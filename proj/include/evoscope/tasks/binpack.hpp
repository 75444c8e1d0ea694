#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoscope/tasks/expression_task.hpp"

namespace evoscope::binpack {

inline constexpr std::size_t kProbeScenarios = 16;
inline constexpr std::size_t kProbeBins = 8;

/// Online instance: items arrive strictly in order.
struct Instance {
    double capacity = 0.0;
    std::vector<double> items;

    static Instance from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

/// One probe scenario: an item and the residual capacities of bins that fit it.
struct ProbeScenario {
    double item = 0.0;
    std::vector<double> bins;
};

/// OR-style random instances: integer item sizes uniform in [lo, hi].
std::vector<Instance> random_instances(std::size_t count, std::size_t items, double capacity, double lo, double hi,
                                       std::uint64_t seed);

/// Places each item into the feasible bin of highest priority (ties and
/// non-finite priorities resolve to the lowest bin index), opening a new bin
/// when none fits. Returns the number of bins used.
std::size_t simulate(const expr::Expression& priority, const Instance& inst);

std::vector<ProbeScenario> make_probes(double capacity, std::uint64_t seed);

/// The canonical starting heuristics (best-fit, worst-fit, first-fit, ...).
std::vector<std::string> canonical_rules();

class BinpackTask final : public ExpressionTask {
public:
    BinpackTask(std::vector<Instance> instances, std::uint64_t seed, std::string dataset_name = "synthetic",
                std::string id = {});

    TaskFamily family() const override { return TaskFamily::Binpack; }
    const std::string& id() const override { return id_; }
    const std::vector<Instance>& instances() const { return instances_; }
    const std::vector<ProbeScenario>& probes() const { return probes_; }

    std::vector<Genome> initial_population(std::size_t n_init) const override;
    /// -mean(bins used) over all instances.
    Evaluation evaluate(const Genome& g) const override;
    /// -(largest instance item count + 1).
    double invalid_fitness() const override { return invalid_fitness_; }
    nlohmann::json instance_json() const override;
    std::map<std::string, std::string> prompt_fields(PromptMode mode) const override;
    std::string format_parent(const Genome& g, double raw_fitness) const override;
    std::vector<std::vector<double>> behavior(const expr::Expression& e) const override;

private:
    std::vector<Instance> instances_;
    std::uint64_t seed_;
    std::string dataset_name_;
    std::string id_;
    std::vector<ProbeScenario> probes_;
    double invalid_fitness_;
};

}  // namespace evoscope::binpack

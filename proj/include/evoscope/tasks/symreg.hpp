#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evoscope/tasks/expression_task.hpp"

namespace evoscope::symreg {

/// MSE assigned to expressions that fail to evaluate or diverge.
inline constexpr double kSentinelMse = 1e6;
inline constexpr std::size_t kProbePoints = 64;

struct Dataset {
    std::vector<std::string> variables;
    std::vector<std::vector<double>> inputs;  // m rows × d columns
    std::vector<double> targets;
    std::vector<std::vector<double>> probe_grid;  // p rows × d columns
    std::string ground_truth;                     // empty for external data
    std::uint64_t seed = 0;

    /// Synthetic damped Duffing-type oscillator, a = -k·x - c·v - α·x³
    /// (+ F·sin(t) when with_time). Coefficients are drawn from the seed and
    /// recorded in ground_truth.
    static Dataset synthetic_oscillator(std::uint64_t seed, std::size_t samples = 200, bool with_time = false);
    /// Reads {variables, inputs, targets} (+ optional probe_grid, seed).
    static Dataset from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// 64 points uniform over the inputs' bounding box, drawn from `seed`.
    void build_probe_grid();
    std::vector<double> column(std::size_t k) const;
    void validate() const;
};

/// Mean squared error of `e` on the dataset; kSentinelMse if any prediction
/// is non-finite. Throws expr::UnboundVariable for variables outside the dataset.
double mse(const expr::Expression& e, const Dataset& ds);

/// 1 - minmax(mse) over all candidates of one instance.
std::vector<double> normalized_fitness(std::span<const double> mses);

/// Outputs of `e` on the probe rows, non-finite entries replaced by 0.
std::vector<double> probe_outputs(const expr::Expression& e, const std::vector<std::vector<double>>& probe,
                                  const std::vector<std::string>& variables);

/// 1 - cos between the two expressions' probe output vectors.
double behavior_distance(const expr::Expression& a, const expr::Expression& b,
                         const std::vector<std::vector<double>>& probe, const std::vector<std::string>& variables);

class SymregTask final : public ExpressionTask {
public:
    explicit SymregTask(Dataset ds, std::string id = {});

    TaskFamily family() const override { return TaskFamily::Symreg; }
    const std::string& id() const override { return id_; }
    const Dataset& dataset() const { return ds_; }

    std::vector<Genome> initial_population(std::size_t n_init) const override;
    Evaluation evaluate(const Genome& g) const override;
    double invalid_fitness() const override { return -kSentinelMse; }
    nlohmann::json instance_json() const override;
    std::map<std::string, std::string> prompt_fields(PromptMode mode) const override;
    std::string format_parent(const Genome& g, double raw_fitness) const override;
    std::vector<std::vector<double>> behavior(const expr::Expression& e) const override;

private:
    Dataset ds_;
    std::string id_;
};

}  // namespace evoscope::symreg

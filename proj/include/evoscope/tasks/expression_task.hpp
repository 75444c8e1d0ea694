#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "evoscope/core/rng.hpp"
#include "evoscope/tasks/task.hpp"

namespace evoscope {

/// 1 - cos(a, b). Non-finite entries count as 0. Both vectors zero → 0;
/// exactly one zero → 1.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Random expression tree of depth ≤ max_depth over `vars` and the function
/// whitelist. Constants are drawn from [-2, 2] at two decimals.
expr::Node random_expression(Rng& rng, std::span<const std::string> vars, std::size_t max_depth);

/// Shared machinery for tasks whose genomes are expressions: canonical
/// serialization, parsing against the declared variable set, and the
/// functional behavior distance over fixed probe scenarios.
class ExpressionTask : public Task {
public:
    explicit ExpressionTask(std::vector<std::string> variables);

    const std::vector<std::string>& variables() const { return variables_; }
    const std::set<std::string>& variable_set() const { return variable_set_; }

    std::string serialize(const Genome& g) const override;
    Genome deserialize(std::string_view text) const override;
    double distance(const Genome& a, const Genome& b) const override;
    DistanceFn distance_over(std::span<const Genome> genomes) const override;

    /// Output vectors of `e` on each probe scenario, non-finite entries zeroed.
    virtual std::vector<std::vector<double>> behavior(const expr::Expression& e) const = 0;

protected:
    const expr::Expression& expect_expression(const Genome& g) const;

private:
    std::vector<std::string> variables_;
    std::set<std::string> variable_set_;
};

/// Mean over scenarios of cosine_distance between matching behavior vectors.
double behavior_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

}  // namespace evoscope

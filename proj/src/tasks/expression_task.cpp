#include "evoscope/tasks/expression_task.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace evoscope {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::min(a.size(), b.size());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::isfinite(a[i]) ? a[i] : 0.0;
        const double y = std::isfinite(b[i]) ? b[i] : 0.0;
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    const bool za = !(na > 0.0) || !std::isfinite(na);
    const bool zb = !(nb > 0.0) || !std::isfinite(nb);
    if (za && zb) return 0.0;
    if (za || zb) return 1.0;
    double cos = dot / (std::sqrt(na) * std::sqrt(nb));
    if (!std::isfinite(cos)) return 1.0;
    cos = std::clamp(cos, -1.0, 1.0);
    return 1.0 - cos;
}

double behavior_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
    if (a.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) total += cosine_distance(a[k], b[k]);
    return total / static_cast<double>(a.size());
}

expr::Node random_expression(Rng& rng, std::span<const std::string> vars, std::size_t max_depth) {
    using expr::BinaryOp;
    using expr::Function;
    using expr::Node;
    auto terminal = [&]() {
        if (!vars.empty() && rng.uniform() < 0.65) return Node::variable(vars[rng.index(vars.size())]);
        return Node::constant(std::round(rng.uniform(-2.0, 2.0) * 100.0) / 100.0);
    };
    if (max_depth <= 1 || rng.uniform() < 0.25) return terminal();
    const double pick = rng.uniform();
    if (pick < 0.7) {
        static constexpr BinaryOp ops[] = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div};
        const BinaryOp op = ops[rng.index(4)];
        return Node::binary(op, random_expression(rng, vars, max_depth - 1), random_expression(rng, vars, max_depth - 1));
    }
    if (pick < 0.8) {
        return Node::binary(BinaryOp::Pow, random_expression(rng, vars, max_depth - 1),
                            Node::constant(static_cast<double>(2 + rng.index(2))));
    }
    static constexpr Function fns[] = {Function::Sin, Function::Cos, Function::Exp, Function::Log,
                                       Function::Sqrt, Function::Abs, Function::Tanh};
    return Node::call(fns[rng.index(7)], random_expression(rng, vars, max_depth - 1));
}

ExpressionTask::ExpressionTask(std::vector<std::string> variables)
    : variables_(std::move(variables)), variable_set_(variables_.begin(), variables_.end()) {}

const expr::Expression& ExpressionTask::expect_expression(const Genome& g) const {
    const expr::Expression* e = as_expression(g);
    if (!e || e->empty()) throw InvalidGenome("expected an expression genome");
    return *e;
}

std::string ExpressionTask::serialize(const Genome& g) const { return expr::canonicalize(expect_expression(g)); }

Genome ExpressionTask::deserialize(std::string_view text) const {
    try {
        return expr::parse(text, variable_set_);
    } catch (const expr::ParseError& e) {
        throw InvalidGenome(e.what());
    }
}

double ExpressionTask::distance(const Genome& a, const Genome& b) const {
    return behavior_distance(behavior(expect_expression(a)), behavior(expect_expression(b)));
}

DistanceFn ExpressionTask::distance_over(std::span<const Genome> genomes) const {
    auto cache = std::make_shared<std::vector<std::vector<std::vector<double>>>>();
    cache->reserve(genomes.size());
    for (const auto& g : genomes) cache->push_back(behavior(expect_expression(g)));
    return [cache](std::size_t i, std::size_t j) { return behavior_distance((*cache)[i], (*cache)[j]); };
}

}  // namespace evoscope

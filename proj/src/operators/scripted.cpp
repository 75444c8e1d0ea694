#include <cmath>
#include <numeric>

#include "evoscope/core/rng.hpp"
#include "evoscope/operators/operators.hpp"
#include "evoscope/tasks/expression_task.hpp"
#include "evoscope/tasks/tsp.hpp"

namespace evoscope::ops {

namespace {

const ParentInfo& pick_parent(const MutationRequest& req, Rng& rng) {
    if (req.parents.empty()) throw std::invalid_argument("mutation request has no parents");
    return req.parents[rng.index(req.parents.size())];
}

void collect(expr::Node& n, std::vector<expr::Node*>& out) {
    out.push_back(&n);
    for (auto& c : n.children) collect(c, out);
}

bool within_limits(const expr::Node& n) { return expr::depth(n) <= expr::kMaxDepth && expr::node_count(n) <= expr::kMaxNodes; }

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

TwoOptOperator::TwoOptOperator(const Task& task) : task_(task) {
    if (task.family() != TaskFamily::Tsp) throw std::invalid_argument("scripted-2opt requires a tsp task");
}

MutationOutcome TwoOptOperator::mutate(const MutationRequest& req) const {
    Rng rng(req.seed);
    const ParentInfo& parent = pick_parent(req, rng);
    const Tour* tour = as_tour(parent.genome);
    if (!tour) throw std::invalid_argument("scripted-2opt parent is not a tour");
    const auto& inst = static_cast<const tsp::TspTask&>(task_).instance();

    const std::size_t n = tour->order.size();
    double best = -1e-12;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = tsp::two_opt_delta(*tour, inst, i, j);
            if (d < best) {
                best = d;
                bi = i;
                bj = j;
            }
        }
    }
    MutationOutcome out;
    out.tag = id();
    out.child = bj > bi ? Genome{tsp::two_opt_move(*tour, bi, bj)} : Genome{*tour};
    return out;
}

ShuffleOperator::ShuffleOperator(const Task& task) : task_(task) {
    if (task.family() != TaskFamily::Tsp && !dynamic_cast<const ExpressionTask*>(&task))
        throw std::invalid_argument("scripted-shuffle does not support this task");
}

MutationOutcome ShuffleOperator::mutate(const MutationRequest& req) const {
    Rng rng(req.seed);
    MutationOutcome out;
    out.tag = id();
    if (task_.family() == TaskFamily::Tsp) {
        Tour t;
        t.order.resize(static_cast<std::size_t>(static_cast<const tsp::TspTask&>(task_).n()));
        std::iota(t.order.begin(), t.order.end(), 0);
        rng.shuffle(t.order);
        out.child = std::move(t);
    } else {
        const auto& vars = static_cast<const ExpressionTask&>(task_).variables();
        out.child = expr::Expression(random_expression(rng, vars, 3));
    }
    return out;
}

SubtreeOperator::SubtreeOperator(const Task& task, std::size_t variants) : task_(task), variants_(variants) {
    if (!dynamic_cast<const ExpressionTask*>(&task))
        throw std::invalid_argument("scripted-subtree requires an expression task");
    if (variants_ == 0) throw std::invalid_argument("scripted-subtree needs at least one variant");
}

MutationOutcome SubtreeOperator::mutate(const MutationRequest& req) const {
    Rng rng(req.seed);
    const ParentInfo& parent = pick_parent(req, rng);
    const expr::Expression* pe = as_expression(parent.genome);
    if (!pe || pe->empty()) throw std::invalid_argument("scripted-subtree parent is not an expression");
    const auto& vars = static_cast<const ExpressionTask&>(task_).variables();

    MutationOutcome out;
    out.tag = id();
    out.child = *pe;
    double best = parent.raw_fitness;
    for (std::size_t k = 0; k < variants_; ++k) {
        expr::Node root = pe->root();
        const double kind = rng.uniform();
        if (kind < 0.5) {
            std::vector<expr::Node*> nodes;
            collect(root, nodes);
            *nodes[rng.index(nodes.size())] = random_expression(rng, vars, 2);
        } else if (kind < 0.75) {
            std::vector<expr::Node*> nodes;
            collect(root, nodes);
            bool touched = false;
            for (auto* n : nodes) {
                if (n->kind != expr::NodeKind::Constant) continue;
                n->value += 0.1 * rng.normal() * (std::abs(n->value) + 0.1);
                touched = true;
            }
            if (!touched) continue;
        } else {
            root = expr::Node::binary(expr::BinaryOp::Add, std::move(root),
                                      expr::Node::binary(expr::BinaryOp::Mul, expr::Node::constant(round2(rng.uniform(-1.0, 1.0))),
                                                         random_expression(rng, vars, 2)));
        }
        if (!within_limits(root)) continue;
        try {
            Genome g = task_.normalize(Genome{expr::Expression(std::move(root))});
            const Evaluation ev = task_.evaluate(g);
            if (ev.valid && ev.raw_fitness > best) {
                best = ev.raw_fitness;
                out.child = std::move(g);
            }
        } catch (const InvalidGenome&) {
        }
    }
    return out;
}

}  // namespace evoscope::ops

#pragma once

// Hand-traced five-attempt TSP trajectory shared by the metrics and
// workbench tests.
//
// Cities sit on a line at positions 0..4, so d(i, j) = |i - j|.
//   record  tour         length  gen  parents   notes
//   0  I1   [0,2,1,3,4]  10      0
//   1  I2   [0,3,1,4,2]  12      0
//   2  a0   [0,1,2,3,4]   8      1    {0}
//   3  a1   (garbage)     -      1    {1}       parse failure
//   4  a2   [0,1,3,2,4]  10      1    {0,1}
//   5  a3   [0,1,2,4,3]   8      1    {1}
//   6  a4   [0,1,2,3,4]   8      1    {0,1}     duplicate of a0
//
// Edge distances (1 - shared/5):
//   a0: I1 0.4, I2 1.0    a2: I1 0.6, I2 0.6    a3: I1 0.6, I2 0.6
//   a4: I1 0.4, I2 1.0    a0-a3 0.4
// Same-generation records are not priors, so a4 keeps novelty 0.4.
//   raw novelty         {0.4, -, 0.6, 0.6, 0.4}
//   breakthroughs       a0 only (-8 > -10; a3 ties -8)   rate 1/5
//   refinements         a0, a3, a4 of 4 valid            LRR 0.75
//   parent-child        0.4, 0.6, 0.6, (0.4+1.0)/2       PCD 0.575
//   final pool (N=2)    a0, a3 at distance 0.4 → H = log 2 for both weightings

#include <cmath>
#include <memory>

#include "evoscope/core/evolution.hpp"
#include "evoscope/tasks/tsp.hpp"

namespace fixture {

struct HandRun {
    std::shared_ptr<evoscope::tsp::TspTask> task;
    evoscope::Trajectory traj;
};

inline HandRun hand_run() {
    using namespace evoscope;
    tsp::Instance inst;
    inst.n = 5;
    inst.seed = 0;
    inst.dist.assign(5, std::vector<double>(5, 0.0));
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) inst.dist[i][j] = std::abs(i - j);
    HandRun h;
    h.task = std::make_shared<tsp::TspTask>(inst, "line5");

    auto& t = h.traj;
    t.run_id = "line5__hand__s1";
    t.task_id = "line5";
    t.operator_id = "hand";
    t.config.n_init = 2;
    t.config.capacity = 2;
    t.config.elite_fraction = 0.5;
    t.config.parents_per_prompt = 1;
    t.config.generations = 1;
    t.config.offspring_per_generation = 5;
    t.config.seed = 1;
    auto add = [&](std::vector<int> order, int gen, std::vector<std::uint64_t> parents) {
        Individual ind;
        ind.id = t.records.size();
        ind.generation = gen;
        ind.parent_ids = std::move(parents);
        ind.operator_tag = gen == 0 ? "init" : "hand";
        if (order.empty()) {
            ind.valid = false;
            ind.serialized = "garbage";
            ind.raw_fitness = h.task->invalid_fitness();
            ind.failure = failure::kParse;
        } else {
            ind.genome = h.task->normalize(Tour{order});
            ind.serialized = h.task->serialize(ind.genome);
            ind.raw_fitness = h.task->evaluate(ind.genome).raw_fitness;
            ind.valid = true;
        }
        t.records.push_back(ind);
    };
    add({0, 2, 1, 3, 4}, 0, {});
    add({0, 3, 1, 4, 2}, 0, {});
    t.initial_count = 2;
    add({0, 1, 2, 3, 4}, 1, {0});
    add({}, 1, {1});
    add({0, 1, 3, 2, 4}, 1, {0, 1});
    add({0, 1, 2, 4, 3}, 1, {1});
    add({0, 1, 2, 3, 4}, 1, {0, 1});
    t.best_so_far = {-10.0, -8.0};
    return h;
}

inline constexpr double kNormEps = 1e-9;
/// Normalized novelty of a2 and a3: (0.6 - 0.4) / (0.2 + eps).
inline double high_norm() { return (0.6 - 0.4) / ((0.6 - 0.4) + kNormEps); }

}  // namespace fixture

#include <doctest.h>

#include <cmath>
#include <functional>

#include "evoscope/core/rng.hpp"
#include "evoscope/tasks/binpack.hpp"
#include "evoscope/tasks/symreg.hpp"
#include "evoscope/tasks/tsp.hpp"
#include "support/oracles.hpp"

using namespace evoscope;

namespace {

tsp::Instance from_points(const std::vector<std::pair<double, double>>& pts) {
    tsp::Instance inst;
    inst.n = static_cast<int>(pts.size());
    inst.dist.assign(pts.size(), std::vector<double>(pts.size(), 0.0));
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts.size(); ++j)
            inst.dist[i][j] = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
    return inst;
}

/// Fewest bins over every assignment of items to bins (small instances only).
std::size_t optimal_bins(const binpack::Instance& inst) {
    const std::size_t n = inst.items.size();
    std::size_t best = n;
    std::vector<double> load(n, 0.0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
        if (used >= best) return;
        if (i == n) {
            best = used;
            return;
        }
        for (std::size_t b = 0; b <= used && b < n; ++b) {
            if (load[b] + inst.items[i] > inst.capacity) continue;
            load[b] += inst.items[i];
            rec(i + 1, std::max(used, b + 1));
            load[b] -= inst.items[i];
        }
    };
    rec(0, 0);
    return best;
}

std::size_t first_fit(const binpack::Instance& inst) {
    std::vector<double> rem;
    for (double item : inst.items) {
        bool placed = false;
        for (auto& r : rem)
            if (r >= item) {
                r -= item;
                placed = true;
                break;
            }
        if (!placed) rem.push_back(inst.capacity - item);
    }
    return rem.size();
}

}  // namespace

TEST_SUITE("tasks") {

TEST_CASE("tsp fitness is the negated closed tour length") {
    tsp::Instance tri;
    tri.n = 3;
    tri.dist = {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
    CHECK(tsp::tour_length(Tour{{0, 1, 2}}, tri) == 3.0);
    CHECK(tsp::fitness(Tour{{0, 1, 2}}, tri) == -3.0);

    const auto square = from_points({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    CHECK(oracle::tsp_optimum(square.dist) == doctest::Approx(4.0));
    CHECK(tsp::brute_force_optimum(square) == doctest::Approx(4.0));
}

TEST_CASE("tsp invalid genomes") {
    const auto inst = tsp::Instance::random(4, 3);
    tsp::TspTask task(inst);
    CHECK_THROWS_AS(tsp::fitness(Tour{{0, 0, 1, 2}}, inst), InvalidGenome);
    const auto ev = task.evaluate(Tour{{0, 0, 1, 2}});
    CHECK_FALSE(ev.valid);
    CHECK(ev.raw_fitness == task.invalid_fitness());
    CHECK(task.invalid_fitness() < tsp::fitness(Tour{{0, 1, 2, 3}}, inst));
    CHECK_THROWS_AS(task.deserialize("[0, 1, 5, 2]"), InvalidGenome);
    CHECK_THROWS_AS(task.deserialize("not a tour"), InvalidGenome);
}

TEST_CASE("tsp edge distance") {
    const Tour a{{0, 1, 2, 3}};
    CHECK(tsp::edge_distance(a, a) == 0.0);
    CHECK(tsp::edge_distance(a, Tour{{1, 2, 3, 0}}) == 0.0);
    CHECK(tsp::edge_distance(a, Tour{{3, 2, 1, 0}}) == 0.0);
    CHECK(tsp::edge_distance(a, Tour{{0, 2, 1, 3}}) == 0.5);
    CHECK_THROWS_AS(tsp::edge_distance(a, Tour{{0, 1, 2}}), std::invalid_argument);
}

TEST_CASE("tsp canonical serialization identifies rotations and reflections") {
    tsp::TspTask task(tsp::Instance::random(5, 1));
    const auto s = task.serialize(Tour{{2, 3, 4, 0, 1}});
    CHECK(s == task.serialize(Tour{{0, 1, 2, 3, 4}}));
    CHECK(s == task.serialize(Tour{{4, 3, 2, 1, 0}}));
    CHECK(task.serialize(task.deserialize(s)) == s);
}

TEST_CASE("2-opt delta matches recomputed lengths") {
    const auto inst = tsp::Instance::random(9, 4);
    Rng rng(4);
    Tour t{{0, 1, 2, 3, 4, 5, 6, 7, 8}};
    rng.shuffle(t.order);
    for (std::size_t i = 1; i < 8; ++i)
        for (std::size_t j = i + 1; j < 9; ++j) {
            const double before = tsp::tour_length(t, inst);
            const double after = tsp::tour_length(tsp::two_opt_move(t, i, j), inst);
            CHECK(tsp::two_opt_delta(t, inst, i, j) == doctest::Approx(after - before).epsilon(1e-12));
        }
    CHECK(tsp::two_opt_move(Tour{{0, 1, 2, 3}}, 1, 2) == Tour{{0, 2, 1, 3}});
}

TEST_CASE("tsp brute force agrees with the oracle on random instances") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto inst = tsp::Instance::random(7, s);
        CHECK(tsp::brute_force_optimum(inst) == doctest::Approx(oracle::tsp_optimum(inst.dist)).epsilon(1e-12));
    }
}

TEST_CASE("tsp instance round-trips through make_task") {
    tsp::TspTask task(tsp::Instance::random(6, 8));
    const auto again = make_task(task.instance_json());
    CHECK(again->id() == task.id());
    const Tour t{{0, 3, 1, 5, 2, 4}};
    CHECK(again->evaluate(t).raw_fitness == task.evaluate(t).raw_fitness);
}

TEST_CASE("symreg mse") {
    symreg::Dataset ds;
    ds.variables = {"x", "v"};
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const double x = rng.uniform(-2, 2), v = rng.uniform(-2, 2);
        ds.inputs.push_back({x, v});
        ds.targets.push_back(x + v);
    }
    ds.build_probe_grid();
    const auto xv = expr::parse("x+v", {"x", "v"});
    CHECK(symreg::mse(xv, ds) == 0.0);

    // Constant 0 against mean-centred targets: MSE is the population variance.
    double mean = 0;
    for (double y : ds.targets) mean += y;
    mean /= ds.targets.size();
    for (auto& y : ds.targets) y -= mean;
    double var = 0;
    for (double y : ds.targets) var += y * y;
    var /= ds.targets.size();
    CHECK(symreg::mse(expr::parse("0", {"x", "v"}), ds) == doctest::Approx(var).epsilon(1e-12));

    ds.inputs[0][0] = -1.0;
    CHECK(symreg::mse(expr::parse("log(x)", {"x", "v"}), ds) == symreg::kSentinelMse);
}

TEST_CASE("symreg normalized fitness is 1 at the instance minimum") {
    const std::vector<double> mses = {0.0, 2.0, 4.0};
    const auto f = symreg::normalized_fitness(mses);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == doctest::Approx(0.5));
    CHECK(f[2] == 0.0);
}

TEST_CASE("symreg task evaluation and invalid sentinel") {
    const auto task = make_task({{"family", "symreg"}, {"seed", 5}});
    CHECK(task->evaluate(task->deserialize("x + v")).valid);
    CHECK_FALSE(task->evaluate(task->deserialize("log(x - 1000)")).valid);
    CHECK_THROWS_AS(task->deserialize("x + q"), InvalidGenome);
    const auto init = task->initial_population(7);
    CHECK(init.size() == 7);
    for (const auto& g : init) CHECK(task->evaluate(g).valid);
}

TEST_CASE("cosine behavior distance") {
    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {2, 4, 6};
    const std::vector<double> c = {-1, -2, -3};
    CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
    CHECK(cosine_distance(a, b) == doctest::Approx(0.0));
    CHECK(cosine_distance(a, c) == doctest::Approx(2.0));
    const std::vector<double> z = {0, 0, 0};
    CHECK(cosine_distance(z, z) == 0.0);
    CHECK(cosine_distance(a, z) == 1.0);
}

TEST_CASE("symreg behavior distance is scale invariant") {
    const auto task = make_task({{"family", "symreg"}, {"seed", 5}});
    const auto a = task->deserialize("x + v");
    const auto b = task->deserialize("2*x + 2*v");
    const auto c = task->deserialize("-(x + v)");
    CHECK(task->distance(a, b) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(task->distance(a, c) == doctest::Approx(2.0));
}

TEST_CASE("bin packing simulator") {
    const std::set<std::string> vars = {"item", "bins"};
    binpack::Instance full{10.0, {10, 10, 10, 10}};
    CHECK(binpack::simulate(expr::parse("-(bins - item)", vars), full) == 4);

    binpack::Instance small{10.0, {5, 5, 6, 4}};
    CHECK(optimal_bins(small) == 2);
    CHECK(binpack::simulate(expr::parse("-(bins - item)", vars), small) == 2);

    const auto instances = binpack::random_instances(3, 40, 150, 20, 100, 9);
    for (const auto& inst : instances)
        CHECK(binpack::simulate(expr::parse("1", vars), inst) == first_fit(inst));
}

TEST_CASE("bin packing task") {
    const auto task = make_task({{"family", "binpack"}, {"seed", 3}, {"instances", 2}, {"items", 30}});
    const auto init = task->initial_population(7);
    CHECK(init.size() == 7);
    const auto ev = task->evaluate(task->deserialize("-(bins - item)"));
    CHECK(ev.valid);
    CHECK(ev.raw_fitness < 0);
    CHECK(task->invalid_fitness() < -30);
    CHECK(task->distance(init[0], init[0]) == doctest::Approx(0.0));
}

}  // TEST_SUITE

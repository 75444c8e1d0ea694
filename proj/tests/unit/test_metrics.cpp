#include <doctest.h>

#include <cmath>

#include "evoscope/metrics/metrics.hpp"
#include "evoscope/operators/operators.hpp"
#include "evoscope/tasks/tsp.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace evoscope;
using namespace evoscope::metrics;

namespace {

/// Trajectory with one initial record of fitness `initial` and one
/// generation of attempts with the given fitness stream.
Trajectory stream(double initial, const std::vector<double>& fitness) {
    Trajectory t;
    Individual init;
    init.valid = true;
    init.raw_fitness = initial;
    t.records.push_back(init);
    t.initial_count = 1;
    for (double f : fitness) {
        Individual a;
        a.id = t.records.size();
        a.generation = 1;
        a.valid = true;
        a.raw_fitness = f;
        a.parent_ids = {0};
        t.records.push_back(a);
    }
    return t;
}

DistanceMatrix cluster_matrix(const std::vector<double>& pos) {
    DistanceMatrix d(pos.size(), std::vector<double>(pos.size()));
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = 0; j < pos.size(); ++j) d[i][j] = std::abs(pos[i] - pos[j]);
    return d;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("novelty is the minimum prior distance") {
    const std::vector<double> pos = {0.0, 0.0, 0.3, -0.7};
    RecordDistance d = [&](std::size_t a, std::size_t b) { return std::abs(pos[a] - pos[b]); };
    const std::vector<std::size_t> same = {1};
    CHECK(novelty(0, same, d) == 0.0);
    const std::vector<std::size_t> priors = {2, 3};
    CHECK(novelty(0, priors, d) == doctest::Approx(0.3));
    CHECK_THROWS_AS(novelty(0, std::vector<std::size_t>{}, d), std::invalid_argument);
}

TEST_CASE("raw novelty matches the quadratic oracle exactly") {
    const auto s = oracle::synthetic_run(17, 8, 4, 5);
    RecordDistance d = [&](std::size_t a, std::size_t b) { return s.dist(a, b); };
    const auto got = raw_novelty(s.traj, d);
    const auto want = oracle::novelty(s.traj, [&](std::size_t a, std::size_t b) { return s.dist(a, b); });
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].has_value() == want[i].has_value());
        if (got[i] && want[i]) CHECK(*got[i] == *want[i]);
    }
}

TEST_CASE("novelty normalization") {
    const auto n = normalize_novelty(std::vector<double>{0, 5, 10});
    CHECK(n[0] == 0.0);
    CHECK(n[1] == doctest::Approx(0.5));
    CHECK(n[2] == doctest::Approx(1.0));
    CHECK(n[2] < 1.0);
    for (double v : normalize_novelty(std::vector<double>{2, 2, 2})) CHECK(v == 0.0);
    CHECK(normalize_novelty(std::vector<double>{3}) == std::vector<double>{0.0});
}

TEST_CASE("breakthroughs use a strict running maximum") {
    auto r = breakthroughs(stream(0, {1, 3, 2, 3, 4}));
    CHECK(r.events == std::vector<std::size_t>{0, 1, 4});
    CHECK(r.rate == doctest::Approx(3.0 / 5.0));
    CHECK(breakthroughs(stream(0, {-1, -1, -2, -5})).rate == 0.0);
    CHECK(breakthroughs(stream(0, {0, 0})).events.empty());

    auto t = stream(0, {1, 2});
    t.records[1].valid = false;
    t.records[1].raw_fitness = 100;
    r = breakthroughs(t);
    CHECK(r.events == std::vector<std::size_t>{1});
    CHECK(r.rate == 0.5);
    CHECK(breakthroughs(t, true).rate == 1.0);
}

TEST_CASE("local refinement is strict against the best parent") {
    auto t = stream(3, {});
    Individual p2;
    p2.id = 1;
    p2.valid = true;
    p2.raw_fitness = 4;
    t.records.push_back(p2);
    t.initial_count = 2;
    auto child = [&](double f) {
        Individual c;
        c.id = t.records.size();
        c.generation = 1;
        c.valid = true;
        c.raw_fitness = f;
        c.parent_ids = {0, 1};
        t.records.push_back(c);
    };
    child(5);
    CHECK(local_refinement_rate(t) == 1.0);
    child(4);
    CHECK(local_refinement_rate(t) == 0.5);

    // Ten valid attempts, four refinements by construction.
    auto ten = stream(0, {1, -1, 2, -2, 0, 3, -3, 4, 0, -4});
    CHECK(local_refinement_rate(ten) == doctest::Approx(0.4));
    CHECK(local_refinement_rate(ten) == oracle::lrr(ten));
}

TEST_CASE("parent-child distance averages parents, then attempts") {
    const std::vector<double> pos = {0.0, 0.2, 0.4};
    RecordDistance d = [&](std::size_t a, std::size_t b) { return std::abs(pos[a] - pos[b]); };
    Trajectory t;
    for (int i = 0; i < 2; ++i) {
        Individual p;
        p.id = i;
        p.valid = true;
        t.records.push_back(p);
    }
    t.initial_count = 2;
    Individual c;
    c.id = 2;
    c.generation = 1;
    c.valid = true;
    c.parent_ids = {0, 1};
    t.records.push_back(c);
    // |0.4 - 0.0| and |0.4 - 0.2| average to 0.3.
    CHECK(parent_child_distance(t, d) == doctest::Approx(0.3));

    RecordDistance zero = [](std::size_t, std::size_t) { return 0.0; };
    CHECK(parent_child_distance(t, zero) == 0.0);
}

TEST_CASE("LRR, PCD and breakthroughs agree with oracles on random trajectories") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = oracle::synthetic_run(seed, 10, 6, 8);
        auto dist = [&](std::size_t a, std::size_t b) { return s.dist(a, b); };
        CHECK(local_refinement_rate(s.traj) == oracle::lrr(s.traj));
        CHECK(parent_child_distance(s.traj, dist) == oracle::pcd(s.traj, dist));
        CHECK(breakthroughs(s.traj).events == oracle::breakthrough_events(s.traj));
    }
}

TEST_CASE("spatial entropy closed forms") {
    for (std::size_t n : {1u, 2u, 8u, 64u}) {
        const DistanceMatrix d(n, std::vector<double>(n, 0.0));
        const std::vector<double> w(n, 1.0);
        CHECK(std::abs(spatial_entropy(d, w, 1.0) - std::log(double(n))) < 1e-10);
    }
    const DistanceMatrix two = {{0, 0.7}, {0.7, 0}};
    CHECK(spatial_entropy(two, std::vector<double>{1, 1}, 0.7) == doctest::Approx(std::log(2.0)));

    // Six points near 0 and two near 50.
    const auto d = cluster_matrix({0, 0.01, 0.02, 0.03, 0.04, 0.05, 50, 50.01});
    const std::vector<double> w(8, 1.0);
    const double h = spatial_entropy(d, w, 1.0);
    const double split = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(h < std::log(8.0));
    CHECK(h > split);
    CHECK(h == doctest::Approx(oracle::entropy(d, w, 1.0)).epsilon(1e-12));

    CHECK_THROWS_AS(spatial_entropy(two, std::vector<double>{0, 0}, 1.0), UndefinedEntropy);
    CHECK_THROWS_AS(spatial_entropy(two, std::vector<double>{1, 1}, 0.0), UndefinedEntropy);
}

TEST_CASE("entropy is permutation invariant") {
    Rng rng(5);
    std::vector<double> pos(12), w(12);
    for (auto& p : pos) p = rng.uniform(0, 5);
    for (auto& x : w) x = rng.uniform();
    const double h = spatial_entropy(cluster_matrix(pos), w, median_bandwidth(cluster_matrix(pos)));
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> pos2, w2;
    for (auto i : perm) {
        pos2.push_back(pos[i]);
        w2.push_back(w[i]);
    }
    const double h2 = spatial_entropy(cluster_matrix(pos2), w2, median_bandwidth(cluster_matrix(pos2)));
    CHECK(std::abs(h - h2) < 1e-12);
}

TEST_CASE("bandwidth and fitness weights") {
    CHECK(median_bandwidth(cluster_matrix({0, 1, 3})) == 2.0);
    CHECK(median_bandwidth(cluster_matrix({2, 2})) == 1.0);
    CHECK(fitness_weights(std::vector<double>{1, 2, 3}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(fitness_weights(std::vector<double>{4, 4}) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("hand-traced trajectory") {
    const auto h = fixture::hand_run();
    const auto d = record_distance(h.traj, *h.task);
    const auto raw = raw_novelty(h.traj, d);
    REQUIRE(raw.size() == 5);
    CHECK(*raw[0] == doctest::Approx(0.4));
    CHECK_FALSE(raw[1].has_value());
    CHECK(*raw[2] == doctest::Approx(0.6));
    CHECK(*raw[3] == doctest::Approx(0.6));
    CHECK(*raw[4] == doctest::Approx(0.4));

    const auto bt = breakthroughs(h.traj);
    CHECK(bt.events == std::vector<std::size_t>{0});
    CHECK(bt.rate == doctest::Approx(0.2));
    CHECK(local_refinement_rate(h.traj) == doctest::Approx(0.75));
    CHECK(parent_child_distance(h.traj, d) == doctest::Approx(0.575));

    std::vector<double> vals;
    for (const auto& r : raw)
        if (r) vals.push_back(*r);
    const auto norm = normalize_novelty(vals);
    std::vector<std::optional<double>> aligned(raw.size());
    for (std::size_t i = 0, k = 0; i < raw.size(); ++i)
        if (raw[i]) aligned[i] = norm[k++];

    const auto desc = describe_run(h.traj, d, aligned);
    CHECK(desc.attempts == 5);
    CHECK(desc.valid_attempts == 4);
    CHECK(desc.avg_novelty == doctest::Approx(fixture::high_norm() / 2));
    CHECK(desc.initial_nov == doctest::Approx(fixture::high_norm() / 2));
    CHECK(desc.best_final_fitness == -8.0);
    CHECK(desc.initial_best_fitness == -10.0);

    const auto gens = summarize_generations(h.traj, *h.task, aligned);
    REQUIRE(gens.size() == 1);
    CHECK(gens[0].offspring_attempts == 5);
    CHECK(gens[0].valid_attempts == 4);
    CHECK(gens[0].breakthrough_count == 1);
    CHECK(gens[0].prob_breakthrough == doctest::Approx(0.2));
    CHECK(gens[0].max_novelty == doctest::Approx(fixture::high_norm()));
    CHECK(gens[0].pool_size == 2);
    CHECK(gens[0].sigma == doctest::Approx(0.4));
    CHECK(gens[0].h_spatial == doctest::Approx(std::log(2.0)));
    CHECK(gens[0].h_fitness == doctest::Approx(std::log(2.0)));
    CHECK(gens[0].best_so_far == -8.0);
}

TEST_CASE("generation summaries on a real run are internally consistent") {
    tsp::TspTask task(tsp::Instance::random(10, 3));
    ops::TwoOptOperator op(task);
    EvolutionConfig cfg;
    cfg.generations = 8;
    const auto t = run_evolution(cfg, task, op);
    const auto d = record_distance(t, task);
    const auto raw = raw_novelty(t, d);
    std::vector<std::optional<double>> norm(raw.size());
    std::vector<double> vals;
    for (const auto& r : raw)
        if (r) vals.push_back(*r);
    const auto n = normalize_novelty(vals);
    for (std::size_t i = 0, k = 0; i < raw.size(); ++i)
        if (raw[i]) norm[i] = n[k++];
    const auto gens = summarize_generations(t, task, norm);
    REQUIRE(gens.size() == 8);
    std::size_t events = 0;
    for (const auto& g : gens) {
        events += g.breakthrough_count;
        CHECK(g.offspring_attempts == 10);
        CHECK(g.h_spatial <= std::log(double(g.pool_size)) + 1e-12);
        CHECK(g.best_so_far == t.best_so_far[g.generation]);
    }
    CHECK(events == breakthroughs(t).events.size());
    // Record distance agrees with the task's own distance.
    for (std::size_t i = 0; i < 5; ++i) CHECK(d(i, i + 7) == task.distance(t.records[i].genome, t.records[i + 7].genome));
}

}  // TEST_SUITE

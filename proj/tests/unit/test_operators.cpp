#include <doctest.h>

#include <cmath>

#include "evoscope/core/evolution.hpp"
#include "evoscope/llm/gateway.hpp"
#include "evoscope/operators/operators.hpp"
#include "evoscope/tasks/symreg.hpp"
#include "evoscope/tasks/tsp.hpp"
#include "support/oracles.hpp"

using namespace evoscope;

namespace {

llm::RetryPolicy no_sleep() {
    llm::RetryPolicy p;
    p.sleep = [](double) {};
    return p;
}

std::shared_ptr<llm::Gateway> scripted_gateway(std::vector<nlohmann::json> lines) {
    return std::make_shared<llm::Gateway>(llm::MockBackend::from_lines(std::move(lines)), no_sleep());
}

MutationRequest request_for(const Task& task, const Genome& parent, std::uint64_t seed) {
    MutationRequest req;
    req.task_id = task.id();
    req.parents.push_back({0, parent, task.serialize(parent), task.evaluate(parent).raw_fitness});
    req.seed = seed;
    return req;
}

tsp::Instance crossed_square() {
    // Tour 0-1-2-3 crosses itself; reversing positions 1..2 uncrosses it.
    const std::vector<std::pair<double, double>> pts = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    tsp::Instance inst;
    inst.n = 4;
    inst.dist.assign(4, std::vector<double>(4, 0.0));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            inst.dist[i][j] = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
    return inst;
}

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("2-opt applies the best improving reversal") {
    tsp::TspTask task(crossed_square());
    ops::TwoOptOperator op(task);
    const auto out = op.mutate(request_for(task, Tour{{0, 1, 2, 3}}, 1));
    REQUIRE(out.child);
    CHECK(task.serialize(*out.child) == task.serialize(Tour{{0, 2, 1, 3}}));
    CHECK(out.tag == "scripted-2opt");

    // At a local optimum the parent comes back unchanged.
    const auto again = op.mutate(request_for(task, *out.child, 2));
    REQUIRE(again.child);
    CHECK(task.serialize(*again.child) == task.serialize(*out.child));
}

TEST_CASE("shuffle produces valid permutations") {
    tsp::TspTask task(tsp::Instance::random(10, 2));
    ops::ShuffleOperator op(task);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto out = op.mutate(request_for(task, Tour{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, s));
        REQUIRE(out.child);
        CHECK(task.evaluate(*out.child).valid);
    }
}

TEST_CASE("subtree operator never returns something worse than its parent") {
    const auto task = make_task({{"family", "symreg"}, {"seed", 2}});
    ops::SubtreeOperator op(*task);
    const auto parent = task->deserialize("x + 0.5*v");
    const double pf = task->evaluate(parent).raw_fitness;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto out = op.mutate(request_for(*task, parent, s));
        REQUIRE(out.child);
        CHECK(task->evaluate(*out.child).raw_fitness >= pf);
    }
}

TEST_CASE("mixing boundaries and frequency") {
    tsp::TspTask task(tsp::Instance::random(8, 1));
    auto strong = std::make_shared<ops::TwoOptOperator>(task);
    auto weak = std::make_shared<ops::ShuffleOperator>(task);
    const Genome parent = Tour{{0, 1, 2, 3, 4, 5, 6, 7}};
    auto weak_fraction = [&](double rho, int n) {
        ops::MixedOperator op(strong, weak, rho);
        int w = 0;
        for (int i = 0; i < n; ++i) w += op.mutate(request_for(task, parent, attempt_seed(3, 0, i))).tag == "weak";
        return w / double(n);
    };
    CHECK(weak_fraction(0.0, 300) == 0.0);
    CHECK(weak_fraction(1.0, 300) == 1.0);
    CHECK(std::abs(weak_fraction(0.5, 10000) - 0.5) <= 0.02);

    // Inside a full run the boundary holds for every attempt.
    EvolutionConfig cfg;
    ops::MixedOperator none(strong, weak, 0.0);
    for (const auto& a : run_evolution(cfg, task, none).attempts()) CHECK(a.operator_tag == "strong");
    CHECK_THROWS_AS(ops::MixedOperator(strong, weak, 1.5), std::invalid_argument);
}

TEST_CASE("genome extraction") {
    tsp::TspTask t3(tsp::Instance::random(3, 1));
    CHECK(std::get<Tour>(ops::extract_genome("{\"genome\": \"[0,1,2]\"}", t3)) == Tour{{0, 1, 2}});
    CHECK(std::get<Tour>(ops::extract_genome("{\"genome\": \"[2,0,1]\"}", t3)) == Tour{{2, 0, 1}});
    CHECK(std::get<Tour>(ops::extract_genome("Sure! {\"genome\": [1, 2, 0]} hope it helps", t3)) == Tour{{1, 2, 0}});
    CHECK(std::get<Tour>(ops::extract_genome("The tour is [0, 2, 1].", t3)) == Tour{{0, 2, 1}});
    CHECK_THROWS_AS(ops::extract_genome("The tour is 0, 2, 1.", t3), ops::ExtractionError);
    CHECK_THROWS_AS(ops::extract_genome("I think the answer is...", t3), ops::ExtractionError);
    CHECK_THROWS_AS(ops::extract_genome("", t3), ops::ExtractionError);

    const auto sr = make_task({{"family", "symreg"}, {"seed", 1}});
    const auto expected = sr->serialize(sr->deserialize("x+v"));
    CHECK(sr->serialize(ops::extract_genome("```\nreturn x + v\n```", *sr)) == expected);
    CHECK(sr->serialize(ops::extract_genome("```python\nimport numpy as np\ndef f(x, v):\n    return x + v;\n```", *sr)) ==
          expected);
    CHECK(sr->serialize(ops::extract_genome("{\"code\": \"x + v\"}", *sr)) == expected);
    CHECK_THROWS_AS(ops::extract_genome("", *sr), ops::ExtractionError);
    CHECK_THROWS_AS(ops::extract_genome("```\nreturn x +\n```", *sr), ops::ExtractionError);
}

TEST_CASE("prompt rendering replaces known placeholders only") {
    const auto out = ops::render("n={n}, keep {json} and {unknown}", {{"n", "8"}, {"json", "J"}});
    CHECK(out == "n=8, keep J and {unknown}");
    const auto t = ops::parse_template("[system]\nsys text\n[user]\nuser {n}\n");
    CHECK(t.system.find("sys text") != std::string::npos);
    CHECK(t.user.find("user {n}") != std::string::npos);
}

TEST_CASE("shipped prompt templates mention every placeholder they need") {
    ops::PromptLibrary lib(ops::PromptLibrary::default_dir());
    for (auto fam : {TaskFamily::Tsp, TaskFamily::Symreg, TaskFamily::Binpack}) {
        CHECK(lib.get(fam, PromptMode::Evolve).user.find("{parents}") != std::string::npos);
        CHECK_FALSE(lib.get(fam, PromptMode::ZeroShot).user.empty());
    }
}

TEST_CASE("llm operator: success, parse failure and transport failure") {
    tsp::TspTask task(tsp::Instance::random(4, 1));
    ops::PromptLibrary prompts(ops::PromptLibrary::default_dir());
    const auto req = request_for(task, Tour{{0, 1, 2, 3}}, 5);

    auto ok = scripted_gateway({{{"reply", "{\"genome\": [0, 2, 1, 3]}"}}});
    ops::LlmOperator good(task, ok, prompts, "m", 0.7, "run");
    auto out = good.mutate(req);
    REQUIRE(out.child);
    CHECK(std::get<Tour>(*out.child) == Tour{{0, 2, 1, 3}});
    CHECK(out.exchange_index == std::optional<std::size_t>(0));
    CHECK(out.tag == "llm:m");
    const auto ex = ok->ledger().snapshot().front();
    CHECK(ex.user.find("[0,1,2,3]") != std::string::npos);

    auto junk = scripted_gateway({{{"reply", "no idea"}}});
    out = ops::LlmOperator(task, junk, prompts, "m", 0.7, "run").mutate(req);
    CHECK_FALSE(out.child);
    CHECK(out.failure == failure::kParse);

    auto down = scripted_gateway({{{"status", 500}}});
    out = ops::LlmOperator(task, down, prompts, "m", 0.7, "run").mutate(req);
    CHECK_FALSE(out.child);
    CHECK(out.failure == failure::kTransport);
    CHECK(out.exchange_index.has_value());
}

TEST_CASE("zero-shot best of 12") {
    tsp::TspTask task(tsp::Instance::random(6, 4));
    ops::PromptLibrary prompts(ops::PromptLibrary::default_dir());
    // The optimal tour is returned only at temperature 0.6.
    std::vector<int> best_order = {0, 1, 2, 3, 4, 5};
    double best_len = 1e300;
    std::vector<int> perm = {1, 2, 3, 4, 5};
    do {
        std::vector<int> t = {0};
        t.insert(t.end(), perm.begin(), perm.end());
        const double len = tsp::tour_length(Tour{t}, task.instance());
        if (len < best_len) {
            best_len = len;
            best_order = t;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    auto backend = std::make_shared<llm::MockBackend>([&](const nlohmann::json& request) {
        const bool hot = std::abs(request.at("temperature").get<double>() - 0.6) < 1e-12;
        const nlohmann::json g = hot ? best_order : std::vector<int>{0, 1, 2, 3, 4, 5};
        return llm::BackendReply{200, llm::MockBackend::completion_body(nlohmann::json{{"genome", g}}.dump()), {}};
    });
    llm::Gateway gateway(backend, no_sleep());
    const auto r = ops::zero_shot_best_of_n(task, gateway, prompts, "m", "zs");
    CHECK(backend->calls() == 12);
    CHECK(r.samples.size() == 12);
    CHECK_FALSE(r.all_invalid);
    CHECK(r.best == doctest::Approx(-oracle::tsp_optimum(task.instance().dist)));

    llm::Gateway junk(llm::MockBackend::from_lines({{{"reply", "nothing useful"}}}), no_sleep());
    const auto bad = ops::zero_shot_best_of_n(task, junk, prompts, "m", "zs");
    CHECK(bad.all_invalid);
    CHECK(bad.best == task.invalid_fitness());
    CHECK(junk.ledger().size() == 12);
}

TEST_CASE("operator specs") {
    const auto s = ops::OperatorSpec::from_json(
        {{"kind", "mixed"}, {"rho", 0.25}, {"strong", {{"kind", "scripted-2opt"}}}, {"weak", {{"kind", "scripted-shuffle"}}}});
    CHECK(s.kind == ops::OperatorKind::Mixed);
    CHECK_FALSE(s.uses_llm());
    CHECK(ops::OperatorSpec::from_json(s.to_json()).to_json() == s.to_json());
    CHECK_THROWS_AS(ops::OperatorSpec::from_json({{"kind", "teleport"}}), std::invalid_argument);
    CHECK_THROWS_AS(ops::OperatorSpec::from_json({{"kind", "mixed"}}), std::invalid_argument);
    CHECK(ops::OperatorSpec::from_json({{"kind", "llm"}, {"model", "m"}}).uses_llm());
}

}  // TEST_SUITE

#include "evoscope/core/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

namespace evoscope {

void EvolutionConfig::validate() const {
    std::vector<std::string> problems;
    if (n_init < 1) problems.push_back("n_init: must be >= 1");
    if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) problems.push_back("elite_fraction: must lie in (0, 1]");
    if (parents_per_prompt < 1) problems.push_back("parents_per_prompt: must be >= 1");
    if (offspring_per_generation < 1) problems.push_back("offspring_per_generation: must be >= 1");
    if (capacity < 1) problems.push_back("capacity: must be >= 1");
    if (max_in_flight < 1) problems.push_back("max_in_flight: must be >= 1");
    if (problems.empty() && parents_per_prompt > elite_size(elite_fraction, capacity))
        problems.push_back("parents_per_prompt: must not exceed ceil(elite_fraction * capacity) = " +
                           std::to_string(elite_size(elite_fraction, capacity)));
    if (!problems.empty()) {
        std::string msg = "invalid evolution config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
}

std::size_t elite_size(double q, std::size_t members) {
    if (members == 0) return 0;
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(members) - 1e-9));
    return std::clamp<std::size_t>(k, 1, members);
}

namespace {

bool ranks_before(const Individual& a, const Individual& b) {
    if (a.valid != b.valid) return a.valid;
    if (a.raw_fitness != b.raw_fitness) return a.raw_fitness > b.raw_fitness;
    return a.id < b.id;
}

}  // namespace

bool PopulationPool::contains(const std::string& serialized) const {
    return std::any_of(members_.begin(), members_.end(), [&](const Individual& m) { return m.serialized == serialized; });
}

std::vector<Individual> PopulationPool::elite(double q) const {
    const std::size_t k = elite_size(q, members_.size());
    return {members_.begin(), members_.begin() + static_cast<std::ptrdiff_t>(k)};
}

void PopulationPool::merge(std::span<const Individual> offspring) {
    std::set<std::string> keys;
    for (const auto& m : members_) keys.insert(m.serialized);
    for (const auto& child : offspring) {
        if (!child.valid) continue;
        best_so_far_ = std::max(best_so_far_, child.raw_fitness);
        if (!keys.insert(child.serialized).second) continue;
        members_.push_back(child);
    }
    std::sort(members_.begin(), members_.end(), ranks_before);
    if (members_.size() > capacity_) members_.resize(capacity_);
}

PopulationPool update_pool(PopulationPool pool, std::span<const Individual> offspring) {
    pool.merge(offspring);
    return pool;
}

std::vector<Individual> select_parents(const PopulationPool& pool, const EvolutionConfig& cfg, Rng& rng) {
    std::vector<Individual> elite = pool.elite(cfg.elite_fraction);
    std::erase_if(elite, [](const Individual& m) { return !m.valid; });
    if (elite.empty()) throw SelectionImpossible("population contains no valid individual");

    double min_f = elite.front().raw_fitness;
    for (const auto& m : elite) min_f = std::min(min_f, m.raw_fitness);
    std::vector<double> cumulative;
    cumulative.reserve(elite.size());
    double total = 0.0;
    for (const auto& m : elite) {
        total += m.raw_fitness - min_f + kSelectionEpsilon;
        cumulative.push_back(total);
    }

    std::vector<Individual> parents;
    parents.reserve(cfg.parents_per_prompt);
    for (std::size_t k = 0; k < cfg.parents_per_prompt; ++k) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        parents.push_back(elite[static_cast<std::size_t>(it - cumulative.begin())]);
    }
    return parents;
}

std::uint64_t attempt_seed(std::uint64_t run_seed, std::size_t generation, std::size_t attempt) {
    return derive_seed({run_seed, generation, attempt});
}

std::vector<PopulationPool> replay_pools(const Trajectory& traj) {
    std::vector<PopulationPool> pools;
    PopulationPool pool(traj.config.capacity);
    pool.merge(traj.initial());
    pools.push_back(pool);
    const auto attempts = traj.attempts();
    std::size_t i = 0;
    for (std::size_t g = 1; g <= traj.config.generations; ++g) {
        const std::size_t begin = i;
        while (i < attempts.size() && attempts[i].generation == static_cast<int>(g)) ++i;
        pool.merge(attempts.subspan(begin, i - begin));
        pools.push_back(pool);
    }
    return pools;
}

namespace {

struct AttemptResult {
    MutationOutcome outcome;
    std::optional<Genome> genome;
    std::string serialized;
    Evaluation eval;
    std::string failure;
};

AttemptResult perform_attempt(const Task& task, const MutationOperator& op, const MutationRequest& req) {
    AttemptResult r;
    r.eval = {false, task.invalid_fitness()};
    try {
        r.outcome = op.mutate(req);
    } catch (const std::exception& e) {
        r.outcome.tag = op.id();
        r.outcome.failure = failure::kOperator;
        r.outcome.raw_text = e.what();
    }
    r.failure = r.outcome.failure;
    if (!r.outcome.child) {
        if (r.failure.empty()) r.failure = failure::kParse;
        r.serialized = r.outcome.raw_text;
        return r;
    }
    try {
        Genome g = task.normalize(*r.outcome.child);
        r.serialized = task.serialize(g);
        r.eval = task.evaluate(g);
        r.genome = std::move(g);
        if (!r.eval.valid) r.failure = failure::kInvalidGenome;
    } catch (const std::exception&) {
        r.failure = failure::kInvalidGenome;
        r.serialized = r.outcome.raw_text;
        r.eval = {false, task.invalid_fitness()};
    }
    return r;
}

}  // namespace

Trajectory run_evolution(const EvolutionConfig& cfg, const Task& task, const MutationOperator& op) {
    cfg.validate();
    Trajectory traj;
    traj.config = cfg;
    traj.task_id = cfg.task_id.empty() ? task.id() : cfg.task_id;
    traj.operator_id = cfg.operator_id.empty() ? op.id() : cfg.operator_id;

    std::uint64_t next_id = 0;
    for (const auto& g0 : task.initial_population(cfg.n_init)) {
        Individual ind;
        ind.id = next_id++;
        ind.generation = 0;
        ind.operator_tag = "init";
        try {
            ind.genome = task.normalize(g0);
            ind.serialized = task.serialize(ind.genome);
            const Evaluation ev = task.evaluate(ind.genome);
            ind.valid = ev.valid;
            ind.raw_fitness = ev.raw_fitness;
        } catch (const InvalidGenome&) {
            ind.valid = false;
            ind.raw_fitness = task.invalid_fitness();
        }
        if (!ind.valid) ind.failure = failure::kInvalidGenome;
        traj.records.push_back(std::move(ind));
    }
    traj.initial_count = traj.records.size();

    PopulationPool pool(cfg.capacity);
    pool.merge(traj.records);
    traj.best_so_far.push_back(pool.best_so_far());

    const std::string statement = task.prompt_fields(PromptMode::Evolve).at("task_desc");
    std::size_t attempt_counter = 0;
    for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
        std::vector<MutationRequest> requests;
        requests.reserve(cfg.offspring_per_generation);
        for (std::size_t a = 0; a < cfg.offspring_per_generation; ++a) {
            Rng rng(attempt_seed(cfg.seed, gen, a));
            MutationRequest req;
            req.task_id = traj.task_id;
            req.task_statement = statement;
            req.attempt_index = attempt_counter + a;
            for (auto& p : select_parents(pool, cfg, rng))
                req.parents.push_back({p.id, std::move(p.genome), std::move(p.serialized), p.raw_fitness});
            req.seed = rng.next_u64();
            requests.push_back(std::move(req));
        }

        std::vector<AttemptResult> results(requests.size());
        for (std::size_t begin = 0; begin < requests.size(); begin += cfg.max_in_flight) {
            const std::size_t end = std::min(requests.size(), begin + cfg.max_in_flight);
            if (end - begin == 1) {
                results[begin] = perform_attempt(task, op, requests[begin]);
                continue;
            }
            std::vector<std::future<AttemptResult>> inflight;
            for (std::size_t k = begin; k < end; ++k)
                inflight.push_back(std::async(std::launch::async, perform_attempt, std::cref(task), std::cref(op),
                                              std::cref(requests[k])));
            for (std::size_t k = begin; k < end; ++k) results[k] = inflight[k - begin].get();
        }

        std::vector<Individual> offspring;
        offspring.reserve(results.size());
        for (std::size_t a = 0; a < results.size(); ++a) {
            auto& r = results[a];
            Individual ind;
            ind.id = next_id++;
            ind.generation = static_cast<int>(gen);
            for (const auto& p : requests[a].parents) ind.parent_ids.push_back(p.id);
            ind.operator_tag = r.outcome.tag.empty() ? op.id() : r.outcome.tag;
            ind.exchange_index = r.outcome.exchange_index;
            ind.serialized = std::move(r.serialized);
            ind.valid = r.eval.valid;
            ind.raw_fitness = r.eval.valid ? r.eval.raw_fitness : task.invalid_fitness();
            ind.failure = r.failure;
            if (r.genome && ind.valid) ind.genome = std::move(*r.genome);
            offspring.push_back(std::move(ind));
        }
        attempt_counter += offspring.size();
        pool.merge(offspring);
        for (auto& o : offspring) traj.records.push_back(std::move(o));
        traj.best_so_far.push_back(pool.best_so_far());
    }
    return traj;
}

}  // namespace evoscope

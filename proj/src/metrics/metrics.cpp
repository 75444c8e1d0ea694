#include "evoscope/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace evoscope::metrics {

RecordDistance record_distance(const Trajectory& traj, const Task& task) {
    auto dense = std::make_shared<std::vector<std::size_t>>(traj.records.size(), SIZE_MAX);
    std::vector<Genome> genomes;
    for (std::size_t i = 0; i < traj.records.size(); ++i) {
        if (!traj.records[i].valid) continue;
        (*dense)[i] = genomes.size();
        genomes.push_back(traj.records[i].genome);
    }
    DistanceFn inner = task.distance_over(genomes);
    return [dense, inner = std::move(inner)](std::size_t a, std::size_t b) {
        const std::size_t da = (*dense)[a], db = (*dense)[b];
        if (da == SIZE_MAX || db == SIZE_MAX) throw std::invalid_argument("distance requested for an invalid record");
        return inner(da, db);
    };
}

double novelty(std::size_t candidate, std::span<const std::size_t> prior, const RecordDistance& d) {
    if (prior.empty()) throw std::invalid_argument("novelty needs a non-empty prior set");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t b : prior) best = std::min(best, d(candidate, b));
    return best;
}

std::vector<std::optional<double>> raw_novelty(const Trajectory& traj, const RecordDistance& d) {
    std::vector<std::size_t> prior;
    for (std::size_t i = 0; i < traj.initial_count; ++i)
        if (traj.records[i].valid) prior.push_back(i);

    std::vector<std::optional<double>> out(traj.records.size() - traj.initial_count);
    std::size_t i = traj.initial_count;
    while (i < traj.records.size()) {
        const int gen = traj.records[i].generation;
        std::size_t end = i;
        while (end < traj.records.size() && traj.records[end].generation == gen) ++end;
        for (std::size_t k = i; k < end; ++k)
            if (traj.records[k].valid) out[k - traj.initial_count] = novelty(k, prior, d);
        for (std::size_t k = i; k < end; ++k)
            if (traj.records[k].valid) prior.push_back(k);
        i = end;
    }
    return out;
}

std::vector<double> normalize_novelty(std::span<const double> raws, double eps) {
    if (raws.empty()) return {};
    const auto [lo, hi] = std::minmax_element(raws.begin(), raws.end());
    const double min = *lo, range = *hi - *lo + eps;
    std::vector<double> out;
    out.reserve(raws.size());
    for (double r : raws) out.push_back((r - min) / range);
    return out;
}

BreakthroughResult breakthroughs(const Trajectory& traj, bool valid_only) {
    BreakthroughResult r;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& ind : traj.initial())
        if (ind.valid) best = std::max(best, ind.raw_fitness);
    const auto attempts = traj.attempts();
    r.attempts = attempts.size();
    for (std::size_t k = 0; k < attempts.size(); ++k) {
        if (!attempts[k].valid) continue;
        ++r.valid_attempts;
        if (attempts[k].raw_fitness > best) {
            r.events.push_back(k);
            best = attempts[k].raw_fitness;
        }
    }
    const std::size_t denom = valid_only ? r.valid_attempts : r.attempts;
    r.rate = denom ? static_cast<double>(r.events.size()) / static_cast<double>(denom) : 0.0;
    return r;
}

double local_refinement_rate(const Trajectory& traj) {
    std::size_t valid = 0, refined = 0;
    for (const auto& ind : traj.attempts()) {
        if (!ind.valid) continue;
        ++valid;
        double parent_best = -std::numeric_limits<double>::infinity();
        for (auto pid : ind.parent_ids) parent_best = std::max(parent_best, traj.records.at(pid).raw_fitness);
        if (ind.raw_fitness > parent_best) ++refined;
    }
    return valid ? static_cast<double>(refined) / static_cast<double>(valid) : 0.0;
}

double parent_child_distance(const Trajectory& traj, const RecordDistance& d) {
    double total = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = traj.initial_count; i < traj.records.size(); ++i) {
        const auto& ind = traj.records[i];
        if (!ind.valid || ind.parent_ids.empty()) continue;
        double s = 0.0;
        for (auto pid : ind.parent_ids) s += d(i, static_cast<std::size_t>(pid));
        total += s / static_cast<double>(ind.parent_ids.size());
        ++valid;
    }
    return valid ? total / static_cast<double>(valid) : 0.0;
}

double spatial_entropy(const DistanceMatrix& d, std::span<const double> weights, double sigma) {
    const std::size_t n = d.size();
    if (n == 0) throw UndefinedEntropy("entropy of an empty member set");
    if (weights.size() != n) throw std::invalid_argument("weights and distance matrix differ in size");
    if (!(sigma > 0.0)) throw UndefinedEntropy("kernel bandwidth must be positive");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("negative entropy weight");
        wsum += w;
    }
    if (wsum <= 0.0) throw UndefinedEntropy("all entropy weights are zero");

    std::vector<double> g(n, 0.0);
    const double denom = 2.0 * sigma * sigma;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[i] += weights[j] * std::exp(-d[i][j] * d[i][j] / denom);
        total += g[i];
    }
    double h = 0.0;
    for (double gi : g) {
        const double q = gi / total;
        if (q > 0.0) h -= q * std::log(q);
    }
    return h;
}

double median_bandwidth(const DistanceMatrix& d) {
    std::vector<double> pos;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = i + 1; j < d.size(); ++j)
            if (d[i][j] > 0.0) pos.push_back(d[i][j]);
    if (pos.empty()) return 1.0;
    std::sort(pos.begin(), pos.end());
    const std::size_t m = pos.size();
    return m % 2 ? pos[m / 2] : 0.5 * (pos[m / 2 - 1] + pos[m / 2]);
}

std::vector<double> fitness_weights(std::span<const double> fitness) {
    if (fitness.empty()) return {};
    const auto [lo, hi] = std::minmax_element(fitness.begin(), fitness.end());
    if (*hi == *lo) return std::vector<double>(fitness.size(), 1.0);
    std::vector<double> w;
    w.reserve(fitness.size());
    for (double f : fitness) w.push_back((f - *lo) / (*hi - *lo));
    return w;
}

std::vector<GenerationSummary> summarize_generations(const Trajectory& traj, const Task& task,
                                                     std::span<const std::optional<double>> normalized_novelty) {
    const auto attempts = traj.attempts();
    if (normalized_novelty.size() != attempts.size())
        throw std::invalid_argument("novelty values not aligned with trajectory attempts");
    const auto pools = replay_pools(traj);
    const auto bt = breakthroughs(traj);
    std::vector<char> is_event(attempts.size(), 0);
    for (auto e : bt.events) is_event[e] = 1;

    std::vector<GenerationSummary> out;
    std::size_t k = 0;
    for (std::size_t t = 1; t < pools.size(); ++t) {
        GenerationSummary s;
        s.run_id = traj.run_id;
        s.task_id = traj.task_id;
        s.operator_id = traj.operator_id;
        s.generation = static_cast<int>(t);
        double nsum = 0.0;
        std::size_t ncount = 0;
        for (; k < attempts.size() && attempts[k].generation == static_cast<int>(t); ++k) {
            ++s.offspring_attempts;
            if (attempts[k].valid) ++s.valid_attempts;
            if (is_event[k]) ++s.breakthrough_count;
            if (normalized_novelty[k]) {
                nsum += *normalized_novelty[k];
                s.max_novelty = ncount ? std::max(s.max_novelty, *normalized_novelty[k]) : *normalized_novelty[k];
                ++ncount;
            }
        }
        s.mean_novelty = ncount ? nsum / static_cast<double>(ncount) : 0.0;
        s.prob_breakthrough =
            s.offspring_attempts ? static_cast<double>(s.breakthrough_count) / static_cast<double>(s.offspring_attempts) : 0.0;

        const auto& members = pools[t].members();
        s.pool_size = members.size();
        s.best_so_far = pools[t].best_so_far();
        if (!members.empty()) {
            std::vector<Genome> genomes;
            std::vector<double> fitness;
            for (const auto& m : members) {
                genomes.push_back(m.genome);
                fitness.push_back(m.raw_fitness);
            }
            const DistanceFn dist = task.distance_over(genomes);
            DistanceMatrix dm(members.size(), std::vector<double>(members.size(), 0.0));
            for (std::size_t i = 0; i < members.size(); ++i)
                for (std::size_t j = i + 1; j < members.size(); ++j) dm[i][j] = dm[j][i] = dist(i, j);
            s.sigma = median_bandwidth(dm);
            const std::vector<double> ones(members.size(), 1.0);
            s.h_spatial = spatial_entropy(dm, ones, s.sigma);
            s.h_fitness = spatial_entropy(dm, fitness_weights(fitness), s.sigma);
        }
        out.push_back(std::move(s));
    }
    return out;
}

RunDescriptors describe_run(const Trajectory& traj, const RecordDistance& d,
                            std::span<const std::optional<double>> normalized_novelty) {
    RunDescriptors r;
    r.run_id = traj.run_id;
    r.task_id = traj.task_id;
    r.operator_id = traj.operator_id;
    r.seed = traj.config.seed;
    const auto bt = breakthroughs(traj);
    r.attempts = bt.attempts;
    r.valid_attempts = bt.valid_attempts;
    r.breakthrough_rate = bt.rate;
    r.lrr = local_refinement_rate(traj);
    r.pcd = parent_child_distance(traj, d);

    const auto attempts = traj.attempts();
    double all = 0.0, first = 0.0;
    std::size_t n_all = 0, n_first = 0;
    for (std::size_t k = 0; k < attempts.size() && k < normalized_novelty.size(); ++k) {
        if (!normalized_novelty[k]) continue;
        all += *normalized_novelty[k];
        ++n_all;
        if (attempts[k].generation == 1) {
            first += *normalized_novelty[k];
            ++n_first;
        }
    }
    r.avg_novelty = n_all ? all / static_cast<double>(n_all) : 0.0;
    r.initial_nov = n_first ? first / static_cast<double>(n_first) : 0.0;
    r.best_final_fitness = traj.best_so_far.empty() ? 0.0 : traj.best_so_far.back();
    r.initial_best_fitness = traj.best_so_far.empty() ? 0.0 : traj.best_so_far.front();
    return r;
}

}  // namespace evoscope::metrics

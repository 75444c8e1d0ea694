#include "evoscope/tasks/binpack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace evoscope::binpack {

namespace {
const std::set<std::string> kVariables = {"item", "bins"};
}

Instance Instance::from_json(const nlohmann::json& j) {
    Instance inst;
    inst.capacity = j.at("capacity").get<double>();
    inst.items = j.at("items").get<std::vector<double>>();
    inst.validate();
    return inst;
}

nlohmann::json Instance::to_json() const { return {{"capacity", capacity}, {"items", items}}; }

void Instance::validate() const {
    if (!(capacity > 0.0)) throw std::invalid_argument("bin capacity must be positive");
    for (double it : items)
        if (!(it > 0.0) || it > capacity) throw std::invalid_argument("item sizes must lie in (0, capacity]");
}

std::vector<Instance> random_instances(std::size_t count, std::size_t items, double capacity, double lo, double hi,
                                       std::uint64_t seed) {
    Rng rng(derive_seed({seed, 0x62696e2d696e7374ULL}));
    std::vector<Instance> out(count);
    for (auto& inst : out) {
        inst.capacity = capacity;
        inst.items.reserve(items);
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        for (std::size_t i = 0; i < items; ++i) inst.items.push_back(lo + static_cast<double>(rng.index(span)));
        inst.validate();
    }
    return out;
}

std::size_t simulate(const expr::Expression& priority, const Instance& inst) {
    std::vector<double> residual;
    std::vector<std::size_t> feasible;
    std::vector<double> feasible_caps;
    for (double item : inst.items) {
        feasible.clear();
        feasible_caps.clear();
        for (std::size_t b = 0; b < residual.size(); ++b) {
            if (residual[b] >= item) {
                feasible.push_back(b);
                feasible_caps.push_back(residual[b]);
            }
        }
        if (feasible.empty()) {
            residual.push_back(inst.capacity - item);
            continue;
        }
        expr::EvalContext ctx;
        ctx.bind("item", item).bind("bins", feasible_caps);
        const auto prio = expr::evaluate(priority, ctx);
        std::size_t chosen = 0;
        bool found = false;
        double best = 0.0;
        for (std::size_t k = 0; k < prio.size(); ++k) {
            if (!std::isfinite(prio[k])) continue;
            if (!found || prio[k] > best) {
                best = prio[k];
                chosen = k;
                found = true;
            }
        }
        residual[feasible[chosen]] -= item;
    }
    return residual.size();
}

std::vector<ProbeScenario> make_probes(double capacity, std::uint64_t seed) {
    Rng rng(derive_seed({seed, 0x70726f6265ULL}));
    std::vector<ProbeScenario> out(kProbeScenarios);
    for (auto& s : out) {
        s.item = capacity * (1.0 - rng.uniform());  // (0, capacity]
        s.bins.resize(kProbeBins);
        for (auto& b : s.bins) b = rng.uniform(s.item, capacity);
    }
    return out;
}

std::vector<std::string> canonical_rules() {
    return {"-(bins - item)", "bins - item", "1", "-(bins - item)^2", "bins / item", "-bins", "item - bins"};
}

BinpackTask::BinpackTask(std::vector<Instance> instances, std::uint64_t seed, std::string dataset_name, std::string id)
    : ExpressionTask({"item", "bins"}),
      instances_(std::move(instances)),
      seed_(seed),
      dataset_name_(std::move(dataset_name)),
      id_(std::move(id)) {
    if (instances_.empty()) throw std::invalid_argument("bin packing task needs at least one instance");
    std::size_t max_items = 0;
    for (const auto& inst : instances_) {
        inst.validate();
        max_items = std::max(max_items, inst.items.size());
    }
    invalid_fitness_ = -(static_cast<double>(max_items) + 1.0);
    probes_ = make_probes(instances_.front().capacity, seed_);
    if (id_.empty()) id_ = "binpack-" + dataset_name_ + "-s" + std::to_string(seed_);
}

std::vector<Genome> BinpackTask::initial_population(std::size_t n_init) const {
    std::vector<Genome> out;
    std::set<std::string> seen;
    for (const auto& rule : canonical_rules()) {
        if (out.size() >= n_init) break;
        auto e = expr::normalize(expr::parse(rule, kVariables), kVariables);
        if (seen.insert(expr::canonicalize(e)).second) out.emplace_back(std::move(e));
    }
    Rng rng(derive_seed({seed_, 0x62696e2d696e6974ULL}));
    for (std::size_t tries = 0; out.size() < n_init && tries < 1000 * (n_init + 1); ++tries) {
        auto e = expr::normalize(expr::Expression(random_expression(rng, variables(), 3)), kVariables);
        if (seen.insert(expr::canonicalize(e)).second) out.emplace_back(std::move(e));
    }
    return out;
}

Evaluation BinpackTask::evaluate(const Genome& g) const {
    const expr::Expression* e = as_expression(g);
    if (!e || e->empty()) return {false, invalid_fitness_};
    double total = 0.0;
    try {
        for (const auto& inst : instances_) total += static_cast<double>(simulate(*e, inst));
    } catch (const expr::UnboundVariable&) {
        return {false, invalid_fitness_};
    }
    return {true, -total / static_cast<double>(instances_.size())};
}

nlohmann::json BinpackTask::instance_json() const {
    nlohmann::json insts = nlohmann::json::array();
    for (const auto& inst : instances_) insts.push_back(inst.to_json());
    return {{"family", "binpack"},
            {"id", id_},
            {"instance", {{"instances", insts}, {"seed", seed_}, {"dataset", dataset_name_}}}};
}

std::map<std::string, std::string> BinpackTask::prompt_fields(PromptMode mode) const {
    std::string desc =
        mode == PromptMode::ZeroShot
            ? "Online bin packing: given items of varying sizes and bins of fixed capacity, design a priority heuristic "
              "that decides where to place each incoming item."
            : "Online bin packing heuristic design. Minimize the number of bins used across all " + dataset_name_ +
                  " instances.";
    return {{"task_desc", desc},
            {"question", ""},
            {"dataset", dataset_name_},
            {"n", std::to_string(instances_.size())}};
}

std::string BinpackTask::format_parent(const Genome& g, double raw_fitness) const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", -raw_fitness);
    return "{\"code\": " + nlohmann::json(serialize(g)).dump() + ", \"avg_bins\": " + buf + "}";
}

std::vector<std::vector<double>> BinpackTask::behavior(const expr::Expression& e) const {
    std::vector<std::vector<double>> out;
    out.reserve(probes_.size());
    for (const auto& s : probes_) {
        expr::EvalContext ctx;
        ctx.bind("item", s.item).bind("bins", s.bins);
        auto v = expr::evaluate(e, ctx);
        for (auto& x : v)
            if (!std::isfinite(x)) x = 0.0;
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace evoscope::binpack

#include "evoscope/tasks/task.hpp"

#include <fstream>

#include "evoscope/tasks/binpack.hpp"
#include "evoscope/tasks/symreg.hpp"
#include "evoscope/tasks/tsp.hpp"

namespace evoscope {

std::string_view to_string(TaskFamily f) {
    switch (f) {
        case TaskFamily::Tsp: return "tsp";
        case TaskFamily::Symreg: return "symreg";
        case TaskFamily::Binpack: return "binpack";
    }
    return "?";
}

TaskFamily task_family_from_string(std::string_view s) {
    if (s == "tsp") return TaskFamily::Tsp;
    if (s == "symreg") return TaskFamily::Symreg;
    if (s == "binpack") return TaskFamily::Binpack;
    throw std::invalid_argument("unknown task family '" + std::string(s) + "'");
}

DistanceFn Task::distance_over(std::span<const Genome> genomes) const {
    return [this, genomes](std::size_t i, std::size_t j) { return distance(genomes[i], genomes[j]); };
}

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open instance file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("instance file '" + path + "' is not valid JSON: " + e.what());
    }
}

std::vector<binpack::Instance> binpack_instances(const nlohmann::json& j) {
    std::vector<binpack::Instance> out;
    if (j.contains("instances")) {
        for (const auto& inst : j.at("instances")) out.push_back(binpack::Instance::from_json(inst));
    } else {
        out.push_back(binpack::Instance::from_json(j));
    }
    return out;
}

}  // namespace

std::unique_ptr<Task> make_task(const nlohmann::json& config) {
    const TaskFamily family = task_family_from_string(config.at("family").get<std::string>());
    const std::string id = config.value("id", std::string{});

    nlohmann::json instance;
    if (config.contains("instance")) {
        instance = config.at("instance");
    } else if (config.contains("instance_file")) {
        instance = read_json_file(config.at("instance_file").get<std::string>());
    }

    switch (family) {
        case TaskFamily::Tsp: {
            if (!instance.is_null()) return std::make_unique<tsp::TspTask>(tsp::Instance::from_json(instance), id);
            return std::make_unique<tsp::TspTask>(
                tsp::Instance::random(config.at("n").get<int>(), config.value("seed", std::uint64_t{21})), id);
        }
        case TaskFamily::Symreg: {
            if (!instance.is_null()) return std::make_unique<symreg::SymregTask>(symreg::Dataset::from_json(instance), id);
            return std::make_unique<symreg::SymregTask>(
                symreg::Dataset::synthetic_oscillator(config.value("seed", std::uint64_t{21}),
                                                      config.value("samples", std::size_t{200}),
                                                      config.value("with_time", false)),
                id);
        }
        case TaskFamily::Binpack: {
            if (!instance.is_null()) {
                return std::make_unique<binpack::BinpackTask>(binpack_instances(instance),
                                                              instance.value("seed", config.value("seed", std::uint64_t{42})),
                                                              instance.value("dataset", config.value("dataset", std::string{"file"})),
                                                              id);
            }
            const auto seed = config.value("seed", std::uint64_t{42});
            auto insts = binpack::random_instances(config.value("instances", std::size_t{5}), config.value("items", std::size_t{120}),
                                                   config.value("capacity", 150.0), config.value("item_min", 20.0),
                                                   config.value("item_max", 100.0), seed);
            return std::make_unique<binpack::BinpackTask>(std::move(insts), seed, config.value("dataset", std::string{"synthetic"}),
                                                          id);
        }
    }
    throw std::invalid_argument("unsupported task family");
}

}  // namespace evoscope

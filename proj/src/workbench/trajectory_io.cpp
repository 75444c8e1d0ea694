#include <glob.h>

#include <algorithm>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include "evoscope/workbench/workbench.hpp"

namespace evoscope::workbench {

std::string trajectory_to_jsonl(const Trajectory& traj, const Task& task, const nlohmann::json& header_extra) {
    nlohmann::json header = {{"type", "header"},
                             {"schema_version", kSchemaVersion},
                             {"run_id", traj.run_id},
                             {"task_id", traj.task_id},
                             {"operator_id", traj.operator_id},
                             {"task", task.instance_json()},
                             {"evolution", to_json(traj.config)},
                             {"initial_count", traj.initial_count},
                             {"records", traj.records.size()}};
    for (const auto& [k, v] : header_extra.items())
        if (!header.contains(k)) header[k] = v;

    std::string out = header.dump() + "\n";
    for (std::size_t i = 0; i < traj.records.size(); ++i) {
        const auto& r = traj.records[i];
        nlohmann::json row = {{"type", "record"},
                              {"index", i},
                              {"attempt", i < traj.initial_count ? nlohmann::json(nullptr) : nlohmann::json(i - traj.initial_count)},
                              {"id", r.id},
                              {"generation", r.generation},
                              {"genome", r.serialized},
                              {"raw_fitness", r.raw_fitness},
                              {"valid", r.valid},
                              {"parent_ids", r.parent_ids},
                              {"operator_tag", r.operator_tag},
                              {"failure", r.failure},
                              {"exchange_index", r.exchange_index ? nlohmann::json(*r.exchange_index) : nlohmann::json(nullptr)},
                              {"raw_novelty", nullptr}};
        out += row.dump() + "\n";
    }
    return out;
}

LoadedTrajectory parse_trajectory(const std::string& text, const std::filesystem::path& origin) {
    const std::string where = origin.empty() ? std::string("trajectory") : origin.string();
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    LoadedTrajectory lt;
    lt.path = origin;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(where + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!have_header) {
            if (j.value("type", std::string{}) != "header") throw SchemaError(where + ": first line is not a header");
            const int version = j.value("schema_version", -1);
            if (version != kSchemaVersion)
                throw SchemaError(where + ": schema version " + std::to_string(version) + ", expected " +
                                  std::to_string(kSchemaVersion));
            lt.header = j;
            lt.task = make_task(j.at("task"));
            lt.traj.run_id = j.at("run_id").get<std::string>();
            lt.traj.task_id = j.at("task_id").get<std::string>();
            lt.traj.operator_id = j.at("operator_id").get<std::string>();
            lt.traj.config = evolution_from_json(j.at("evolution"));
            lt.traj.initial_count = j.at("initial_count").get<std::size_t>();
            have_header = true;
            continue;
        }
        try {
            if (j.at("index").get<std::size_t>() != lt.traj.records.size())
                throw SchemaError(where + ":" + std::to_string(lineno) + ": record indices are not dense");
            Individual ind;
            ind.id = j.at("id").get<std::uint64_t>();
            ind.generation = j.at("generation").get<int>();
            ind.serialized = j.at("genome").get<std::string>();
            ind.raw_fitness = j.at("raw_fitness").get<double>();
            ind.valid = j.at("valid").get<bool>();
            ind.parent_ids = j.at("parent_ids").get<std::vector<std::uint64_t>>();
            ind.operator_tag = j.at("operator_tag").get<std::string>();
            ind.failure = j.value("failure", std::string{});
            if (j.contains("exchange_index") && !j.at("exchange_index").is_null())
                ind.exchange_index = j.at("exchange_index").get<std::size_t>();
            if (ind.valid) ind.genome = lt.task->deserialize(ind.serialized);
            lt.traj.records.push_back(std::move(ind));
        } catch (const SchemaError&) {
            throw;
        } catch (const std::exception& e) {
            throw SchemaError(where + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw SchemaError(where + ": empty trajectory file");
    if (lt.traj.initial_count > lt.traj.records.size()) throw SchemaError(where + ": truncated initial population");

    double best = -std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    for (std::size_t g = 0; g <= lt.traj.config.generations; ++g) {
        for (; k < lt.traj.records.size() && lt.traj.records[k].generation == static_cast<int>(g); ++k)
            if (lt.traj.records[k].valid) best = std::max(best, lt.traj.records[k].raw_fitness);
        lt.traj.best_so_far.push_back(best);
    }
    return lt;
}

LoadedTrajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_trajectory(buf.str(), path);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("write failed for '" + path.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::filesystem::path> expand_globs(const std::vector<std::string>& patterns) {
    std::set<std::string> found;
    for (const auto& p : patterns) {
        glob_t g{};
        const int rc = ::glob(p.c_str(), 0, nullptr, &g);
        if (rc == 0)
            for (std::size_t i = 0; i < g.gl_pathc; ++i) found.insert(g.gl_pathv[i]);
        globfree(&g);
    }
    return {found.begin(), found.end()};
}

}  // namespace evoscope::workbench

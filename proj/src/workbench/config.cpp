#include <openssl/evp.h>

#include <cstdio>
#include <set>
#include <sstream>

#include "evoscope/workbench/workbench.hpp"

namespace evoscope::workbench {

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        out += buf;
    }
    return out;
}

std::string config_hash(const nlohmann::json& config) { return sha256_hex(config.dump()); }

nlohmann::json to_json(const EvolutionConfig& cfg) {
    return {{"n_init", cfg.n_init},
            {"elite_fraction", cfg.elite_fraction},
            {"parents_per_prompt", cfg.parents_per_prompt},
            {"offspring_per_generation", cfg.offspring_per_generation},
            {"capacity", cfg.capacity},
            {"generations", cfg.generations},
            {"seed", cfg.seed},
            {"task_id", cfg.task_id},
            {"operator_id", cfg.operator_id},
            {"max_in_flight", cfg.max_in_flight}};
}

EvolutionConfig evolution_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("evolution: expected an object");
    static const std::set<std::string> known = {"n_init",   "elite_fraction", "parents_per_prompt",
                                                "offspring_per_generation", "capacity", "generations",
                                                "seed",     "task_id",        "operator_id",
                                                "max_in_flight"};
    std::vector<std::string> problems;
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) problems.push_back("evolution." + k + ": unknown field");

    EvolutionConfig cfg;
    auto count = [&](const char* key, std::size_t& dst) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            problems.push_back(std::string("evolution.") + key + ": expected a non-negative integer");
        else
            dst = v.get<std::size_t>();
    };
    count("n_init", cfg.n_init);
    count("parents_per_prompt", cfg.parents_per_prompt);
    count("offspring_per_generation", cfg.offspring_per_generation);
    count("capacity", cfg.capacity);
    count("generations", cfg.generations);
    count("max_in_flight", cfg.max_in_flight);
    if (j.contains("elite_fraction")) {
        if (!j.at("elite_fraction").is_number()) problems.push_back("evolution.elite_fraction: expected a number");
        else cfg.elite_fraction = j.at("elite_fraction").get<double>();
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer()) problems.push_back("evolution.seed: expected an integer");
        else cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("task_id")) cfg.task_id = j.at("task_id").get<std::string>();
    if (j.contains("operator_id")) cfg.operator_id = j.at("operator_id").get<std::string>();
    // Range checks on the fields that did parse, so one pass reports everything.
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        std::istringstream lines(e.what());
        std::string line;
        std::getline(lines, line);
        while (std::getline(lines, line)) problems.push_back("evolution." + line.substr(line.find_first_not_of(' ')));
    }
    if (!problems.empty()) {
        std::string msg = "invalid evolution config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

namespace {

void set_path(nlohmann::json& j, const std::string& dotted, const nlohmann::json& value) {
    nlohmann::json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("matrix: malformed key '" + dotted + "'");
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        if (!cur->contains(key)) (*cur)[key] = nlohmann::json::object();
        cur = &(*cur)[key];
        if (!cur->is_object()) throw ConfigError("matrix: '" + dotted + "' passes through a non-object");
        start = dot + 1;
    }
}

std::string scalar_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::vector<nlohmann::json> expand_matrix(const nlohmann::json& config) {
    if (!config.is_object() || !config.contains("matrix")) return {config};
    const auto& matrix = config.at("matrix");
    if (!matrix.is_object() || matrix.empty()) throw ConfigError("matrix: expected a non-empty object of lists");
    nlohmann::json base = config;
    base.erase("matrix");
    std::vector<std::pair<nlohmann::json, std::string>> acc = {{base, ""}};
    for (const auto& [key, values] : matrix.items()) {
        if (!values.is_array() || values.empty()) throw ConfigError("matrix." + key + ": expected a non-empty list");
        std::vector<std::pair<nlohmann::json, std::string>> next;
        for (const auto& [cfg, tag] : acc) {
            for (const auto& v : values) {
                nlohmann::json c = cfg;
                set_path(c, key, v);
                next.emplace_back(std::move(c), tag + (tag.empty() ? "" : ",") + key + "=" + scalar_text(v));
            }
        }
        acc = std::move(next);
    }
    std::vector<nlohmann::json> out;
    for (auto& [cfg, tag] : acc) {
        cfg["variant"] = tag;
        out.push_back(std::move(cfg));
    }
    return out;
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    static const std::set<std::string> known = {"task",       "operator",   "evolution", "repetitions", "output_dir",
                                                "prompt_dir", "llm",        "matrix",    "variant",     "name"};
    std::vector<std::string> problems;
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) problems.push_back(k + ": unknown field");

    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_absolute() ? path : base_dir / path).lexically_normal();
    };

    RunConfig rc;
    rc.raw = j;
    rc.variant = j.value("variant", std::string{});
    if (!j.contains("task") || !j.at("task").is_object() || !j.at("task").contains("family"))
        problems.push_back("task: required object with a 'family' field");
    else
        rc.task = j.at("task");
    if (rc.task.is_object() && rc.task.contains("instance_file") && rc.task.at("instance_file").is_string())
        rc.task["instance_file"] = resolve(rc.task.at("instance_file").get<std::string>()).string();

    if (!j.contains("operator")) {
        problems.push_back("operator: required");
    } else {
        try {
            rc.op = ops::OperatorSpec::from_json(j.at("operator"));
        } catch (const std::exception& e) {
            problems.push_back(e.what());
        }
    }

    nlohmann::json evo = j.value("evolution", nlohmann::json::object());
    const std::string family = rc.task.is_object() ? rc.task.value("family", std::string{}) : std::string{};
    if (evo.is_object() && !evo.contains("n_init") && (family == "symreg" || family == "binpack")) evo["n_init"] = 7;
    try {
        rc.evolution = evolution_from_json(evo);
    } catch (const ConfigError& e) {
        problems.push_back(e.what());
    }

    if (j.contains("repetitions")) {
        const auto& r = j.at("repetitions");
        if (!r.is_number_integer() || r.get<std::int64_t>() < 1) problems.push_back("repetitions: expected an integer >= 1");
        else rc.repetitions = r.get<std::size_t>();
    }
    if (!j.contains("output_dir") || !j.at("output_dir").is_string() || j.at("output_dir").get<std::string>().empty())
        problems.push_back("output_dir: required string");
    else
        rc.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("prompt_dir")) {
        if (!j.at("prompt_dir").is_string()) problems.push_back("prompt_dir: expected a string");
        else rc.prompt_dir = resolve(j.at("prompt_dir").get<std::string>());
    } else {
        rc.prompt_dir = ops::PromptLibrary::default_dir();
    }
    if (j.contains("llm")) {
        const auto& llm = j.at("llm");
        if (!llm.is_object()) {
            problems.push_back("llm: expected an object");
        } else {
            if (llm.contains("mock_replies")) {
                if (!llm.at("mock_replies").is_string()) problems.push_back("llm.mock_replies: expected a path string");
                else rc.mock_replies = resolve(llm.at("mock_replies").get<std::string>());
            }
            if (llm.contains("max_in_flight")) {
                const auto& m = llm.at("max_in_flight");
                if (!m.is_number_integer() || m.get<std::int64_t>() < 1)
                    problems.push_back("llm.max_in_flight: expected an integer >= 1");
                else rc.llm_max_in_flight = m.get<std::size_t>();
            }
        }
    }
    if (rc.mock_replies && !std::filesystem::exists(*rc.mock_replies))
        problems.push_back("llm.mock_replies: file not found: " + rc.mock_replies->string());

    if (!problems.empty()) {
        std::string msg = "invalid run config";
        if (!rc.variant.empty()) msg += " (variant " + rc.variant + ")";
        msg += ":";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return rc;
}

std::string sanitize(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.' || c == '=';
        out += ok ? c : '_';
    }
    return out;
}

}  // namespace evoscope::workbench

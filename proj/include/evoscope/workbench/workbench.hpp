#pragma once

/// @file workbench.hpp
/// @brief Run configuration, trajectory persistence and the command
/// implementations behind the evoscope CLI.

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoscope/core/evolution.hpp"
#include "evoscope/operators/operators.hpp"

namespace evoscope::workbench {

inline constexpr int kSchemaVersion = 1;

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Hash of a parsed config: SHA-256 of its compact dump (object keys sorted).
std::string config_hash(const nlohmann::json& config);

nlohmann::json to_json(const EvolutionConfig& cfg);
/// Missing fields keep their defaults. Throws ConfigError on wrong types.
EvolutionConfig evolution_from_json(const nlohmann::json& j);

/// Cartesian expansion of an optional "matrix" block whose keys are dotted
/// paths into the config, e.g. {"operator.temperature": [0.0, 0.5]}. Each
/// variant carries "variant": "<key>=<value>,...". Without a matrix the
/// config is returned unchanged.
std::vector<nlohmann::json> expand_matrix(const nlohmann::json& config);

/// One concrete (matrix-expanded) run configuration.
///
/// {
///   "task":       {"family": "tsp", "n": 8, "seed": 21},
///   "operator":   {"kind": "scripted-2opt"},
///   "evolution":  {"generations": 30, "offspring_per_generation": 10, "seed": 21, ...},
///   "repetitions": 2,
///   "output_dir": "runs/tsp8",
///   "prompt_dir": "prompts",
///   "llm": {"mock_replies": "replies.jsonl", "max_in_flight": 4}
/// }
/// Relative paths resolve against the config file's directory.
struct RunConfig {
    nlohmann::json task;
    ops::OperatorSpec op;
    EvolutionConfig evolution;
    std::size_t repetitions = 2;
    std::filesystem::path output_dir;
    std::filesystem::path prompt_dir;
    std::optional<std::filesystem::path> mock_replies;
    std::size_t llm_max_in_flight = 4;
    std::string variant;
    nlohmann::json raw;

    /// Collects every field problem into one ConfigError.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

/// Filesystem-safe identifier.
std::string sanitize(std::string_view s);

/// Header line plus one row per record. Rows carry "index" (dense record
/// index), "attempt" (null for the initial population) and "raw_novelty"
/// (null; novelty is computed by analyze).
std::string trajectory_to_jsonl(const Trajectory& traj, const Task& task, const nlohmann::json& header_extra);

struct LoadedTrajectory {
    std::filesystem::path path;
    nlohmann::json header;
    std::shared_ptr<const Task> task;
    Trajectory traj;
};

/// Parses a trajectory file and rebuilds its task and genomes. Throws
/// SchemaError on a version mismatch or malformed rows.
LoadedTrajectory read_trajectory(const std::filesystem::path& path);
LoadedTrajectory parse_trajectory(const std::string& text, const std::filesystem::path& origin = {});

/// Writes to a sibling temporary file and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// POSIX glob over each pattern; results sorted and de-duplicated.
std::vector<std::filesystem::path> expand_globs(const std::vector<std::string>& patterns);

struct RunSummary {
    std::vector<std::filesystem::path> trajectories;
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> ledger;
    std::size_t gateway_calls = 0;
};

/// Runs every matrix variant × repetition. Everything is computed before
/// anything is written, so a failing config leaves no files behind.
RunSummary cmd_run(const std::filesystem::path& config_path, std::ostream& log);

struct AnalyzeSummary {
    std::size_t runs = 0;
    std::vector<std::string> tasks;
    std::filesystem::path generations_csv;
    std::filesystem::path descriptors_csv;
    std::filesystem::path attempts_csv;
};

/// Per-generation summaries, per-run descriptors and per-attempt novelty.
/// Novelty is normalized over all runs of the same task instance; runs of
/// different tasks never share distances.
AnalyzeSummary cmd_analyze(const std::vector<std::string>& patterns, const std::filesystem::path& out_dir,
                           std::ostream& log);

struct StatsOptions {
    std::string spec;  // M1..M8, concurrent, lagged, heatmap
    std::optional<std::filesystem::path> descriptors;
    std::optional<std::filesystem::path> generations;
    std::optional<std::filesystem::path> zeroshot;  // CSV: model, task, zero_shot_perf
    std::size_t bins = 10;
    std::filesystem::path out_prefix;  // writes <prefix>.json and <prefix>.csv
};

void cmd_stats(const StatsOptions& opt, std::ostream& log);

struct MdsOptions {
    std::size_t cap_per_bucket = 60;
    std::size_t total_cap = 4000;
    std::size_t k = 8;
    double p = 2.0;
    std::uint64_t seed = 0;
    int max_iter = 300;
    double eps = 1e-3;
};

/// Writes mds_<task>.csv (run_id, id, x, y, generation, fitness_norm, base)
/// per task and mds_manifest.json with stress and iteration counts.
nlohmann::json cmd_mds(const std::vector<std::string>& patterns, const std::filesystem::path& out_dir,
                       const MdsOptions& opt, std::ostream& log);

struct ZeroShotOptions {
    nlohmann::json task;
    std::string model;
    std::optional<std::filesystem::path> mock_replies;
    std::filesystem::path prompt_dir;
    std::filesystem::path out_dir;
};

ops::ZeroShotResult cmd_zeroshot(const ZeroShotOptions& opt, std::ostream& log);

/// CSV cost table (run_id, model, exchanges, prompt_tokens,
/// completion_tokens, cost, priced) plus a TOTAL row.
std::string cmd_cost(const std::vector<std::filesystem::path>& ledgers, const std::filesystem::path& prices,
                     std::ostream& log);

}  // namespace evoscope::workbench

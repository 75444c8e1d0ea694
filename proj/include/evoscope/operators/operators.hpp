#pragma once

/// @file operators.hpp
/// @brief Mutation operators: prompt-templated LLM calls, scripted local
/// edits for offline runs, and the strong/weak mixing perturbation.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evoscope/core/operator.hpp"
#include "evoscope/llm/gateway.hpp"
#include "evoscope/tasks/task.hpp"

namespace evoscope::ops {

struct PromptTemplate {
    std::string system;
    std::string user;
};

/// Splits a template file into its "[system]" and "[user]" sections.
PromptTemplate parse_template(std::string_view text);

/// Substitutes {name} for every key in `fields`. Braces that do not enclose
/// a known identifier are left untouched, so JSON examples survive.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& fields);

/// Loads <family>_<evolve|zeroshot>.txt from a directory.
class PromptLibrary {
public:
    explicit PromptLibrary(std::filesystem::path dir);

    const PromptTemplate& get(TaskFamily family, PromptMode mode) const;
    const std::filesystem::path& dir() const { return dir_; }

    /// $EVOSCOPE_PROMPT_DIR, else the source tree's prompts/ directory.
    static std::filesystem::path default_dir();

private:
    std::filesystem::path dir_;
    std::map<std::pair<TaskFamily, PromptMode>, PromptTemplate> templates_;
};

class ExtractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pulls a genome out of a model reply.
///
/// TSP: the first JSON object with a "genome" key (array or string holding
/// an array), else the first bracketed integer list. Expressions: the first
/// fenced code block, else a JSON "code" value, else the whole reply; a
/// Python function wrapper (def / return / imports / comments) is stripped
/// before parsing. The returned tour is not checked for being a permutation.
Genome extract_genome(std::string_view text, const Task& task);

/// Parent block for the evolution prompt, one task-formatted line per parent.
std::string format_parents(const Task& task, const std::vector<ParentInfo>& parents);

/// Best-improvement 2-opt on a uniformly chosen parent. Returns the parent
/// itself when no move shortens it.
class TwoOptOperator final : public MutationOperator {
public:
    explicit TwoOptOperator(const Task& task);
    std::string id() const override { return "scripted-2opt"; }
    MutationOutcome mutate(const MutationRequest& req) const override;

private:
    const Task& task_;
};

/// Ignores the parents: a uniform random permutation for TSP, a random
/// depth-3 expression otherwise.
class ShuffleOperator final : public MutationOperator {
public:
    explicit ShuffleOperator(const Task& task);
    std::string id() const override { return "scripted-shuffle"; }
    MutationOutcome mutate(const MutationRequest& req) const override;

private:
    const Task& task_;
};

/// Draws `variants` edits of a uniformly chosen expression parent (subtree
/// replacement, constant jitter, additive term), evaluates them with the
/// task and returns the best one if it beats the parent, else the parent.
class SubtreeOperator final : public MutationOperator {
public:
    explicit SubtreeOperator(const Task& task, std::size_t variants = 16);
    std::string id() const override { return "scripted-subtree"; }
    MutationOutcome mutate(const MutationRequest& req) const override;

private:
    const Task& task_;
    std::size_t variants_;
};

class LlmOperator final : public MutationOperator {
public:
    LlmOperator(const Task& task, std::shared_ptr<llm::Gateway> gateway, const PromptLibrary& prompts,
                std::string model, double temperature, std::string run_id = {});
    std::string id() const override { return "llm:" + model_; }
    MutationOutcome mutate(const MutationRequest& req) const override;

    void set_run_id(std::string run_id) { run_id_ = std::move(run_id); }

private:
    const Task& task_;
    std::shared_ptr<llm::Gateway> gateway_;
    PromptTemplate template_;
    std::string model_;
    double temperature_;
    std::string run_id_;
};

/// Delegates to `weak` with probability rho, else to `strong`; tags the
/// attempt "weak" or "strong".
class MixedOperator final : public MutationOperator {
public:
    MixedOperator(std::shared_ptr<const MutationOperator> strong, std::shared_ptr<const MutationOperator> weak,
                  double rho);
    std::string id() const override;
    MutationOutcome mutate(const MutationRequest& req) const override;

private:
    std::shared_ptr<const MutationOperator> strong_;
    std::shared_ptr<const MutationOperator> weak_;
    double rho_;
};

enum class OperatorKind { Llm, TwoOpt, Subtree, Shuffle, Mixed };

std::string_view to_string(OperatorKind k);

/// Operator block of a run config.
///
/// {"kind": "llm", "model": "...", "temperature": 0.7}
/// {"kind": "scripted-2opt"} | {"kind": "scripted-subtree", "variants": 16} | {"kind": "scripted-shuffle"}
/// {"kind": "mixed", "rho": 0.25, "strong": {...}, "weak": {...}}
struct OperatorSpec {
    OperatorKind kind = OperatorKind::TwoOpt;
    std::string model;
    double temperature = 0.7;
    std::size_t variants = 16;
    double rho = 0.0;
    std::shared_ptr<OperatorSpec> strong;
    std::shared_ptr<OperatorSpec> weak;

    /// Throws std::invalid_argument with the offending field.
    static OperatorSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    bool uses_llm() const;
};

struct OperatorContext {
    const Task* task = nullptr;
    std::shared_ptr<llm::Gateway> gateway;  // required for llm kinds
    const PromptLibrary* prompts = nullptr; // required for llm kinds
    std::string run_id;
};

std::unique_ptr<MutationOperator> make_operator(const OperatorSpec& spec, const OperatorContext& ctx);

inline const std::vector<double> kZeroShotTemperatures = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
inline constexpr int kZeroShotPerTemperature = 2;

struct ZeroShotSample {
    double temperature = 0.0;
    bool valid = false;
    double raw_fitness = 0.0;
    std::string serialized;
    std::string failure;
    std::optional<std::size_t> exchange_index;
};

struct ZeroShotResult {
    std::string model;
    std::string task_id;
    double best = 0.0;  // invalid sentinel when every sample failed
    bool all_invalid = true;
    std::vector<ZeroShotSample> samples;

    nlohmann::json to_json() const;
};

/// Temperature-swept best-of-N: 2 calls at each of six temperatures.
ZeroShotResult zero_shot_best_of_n(const Task& task, llm::Gateway& gateway, const PromptLibrary& prompts,
                                   const std::string& model, const std::string& run_id = {});

}  // namespace evoscope::ops

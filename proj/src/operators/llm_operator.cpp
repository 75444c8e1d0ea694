#include <cmath>
#include <cstdio>

#include "evoscope/core/rng.hpp"
#include "evoscope/operators/operators.hpp"

namespace evoscope::ops {

LlmOperator::LlmOperator(const Task& task, std::shared_ptr<llm::Gateway> gateway, const PromptLibrary& prompts,
                         std::string model, double temperature, std::string run_id)
    : task_(task),
      gateway_(std::move(gateway)),
      template_(prompts.get(task.family(), PromptMode::Evolve)),
      model_(std::move(model)),
      temperature_(temperature),
      run_id_(std::move(run_id)) {
    if (!gateway_) throw std::invalid_argument("llm operator needs a gateway");
    if (model_.empty()) throw std::invalid_argument("llm operator needs a model id");
    if (!(temperature_ >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
}

MutationOutcome LlmOperator::mutate(const MutationRequest& req) const {
    auto fields = task_.prompt_fields(PromptMode::Evolve);
    fields["parents"] = format_parents(task_, req.parents);
    fields["num_parents"] = std::to_string(req.parents.size());

    MutationOutcome out;
    out.tag = id();
    llm::ChatResult res;
    try {
        res = gateway_->chat(model_, {{"system", render(template_.system, fields)}, {"user", render(template_.user, fields)}},
                             temperature_, run_id_);
    } catch (const llm::TransportError& e) {
        out.failure = failure::kTransport;
        out.raw_text = e.what();
        out.exchange_index = e.ledger_index();
        return out;
    }
    out.exchange_index = res.ledger_index;
    out.raw_text = res.exchange.reply;
    try {
        out.child = extract_genome(res.exchange.reply, task_);
    } catch (const ExtractionError&) {
        out.failure = failure::kParse;
    }
    return out;
}

MixedOperator::MixedOperator(std::shared_ptr<const MutationOperator> strong,
                             std::shared_ptr<const MutationOperator> weak, double rho)
    : strong_(std::move(strong)), weak_(std::move(weak)), rho_(rho) {
    if (!strong_ || !weak_) throw std::invalid_argument("mixed operator needs both strong and weak operators");
    if (!(rho_ >= 0.0 && rho_ <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
}

std::string MixedOperator::id() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", rho_);
    return "mixed(" + strong_->id() + "," + weak_->id() + ",rho=" + buf + ")";
}

MutationOutcome MixedOperator::mutate(const MutationRequest& req) const {
    Rng rng(derive_seed({req.seed, 0x6d69786564ULL}));
    const bool weak = rng.bernoulli(rho_);
    MutationRequest sub = req;
    sub.seed = rng.next_u64();
    MutationOutcome out = (weak ? weak_ : strong_)->mutate(sub);
    out.tag = weak ? "weak" : "strong";
    return out;
}

std::string_view to_string(OperatorKind k) {
    switch (k) {
        case OperatorKind::Llm: return "llm";
        case OperatorKind::TwoOpt: return "scripted-2opt";
        case OperatorKind::Subtree: return "scripted-subtree";
        case OperatorKind::Shuffle: return "scripted-shuffle";
        case OperatorKind::Mixed: return "mixed";
    }
    return "?";
}

OperatorSpec OperatorSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("operator: expected an object");
    OperatorSpec s;
    const std::string kind = j.value("kind", std::string{});
    if (kind == "llm") s.kind = OperatorKind::Llm;
    else if (kind == "scripted-2opt") s.kind = OperatorKind::TwoOpt;
    else if (kind == "scripted-subtree") s.kind = OperatorKind::Subtree;
    else if (kind == "scripted-shuffle") s.kind = OperatorKind::Shuffle;
    else if (kind == "mixed") s.kind = OperatorKind::Mixed;
    else throw std::invalid_argument("operator.kind: unknown kind '" + kind + "'");

    if (s.kind == OperatorKind::Llm) {
        s.model = j.value("model", std::string{});
        if (s.model.empty()) throw std::invalid_argument("operator.model: required for kind llm");
        s.temperature = j.value("temperature", 0.7);
        if (!(s.temperature >= 0.0)) throw std::invalid_argument("operator.temperature: must be >= 0");
    }
    if (s.kind == OperatorKind::Subtree) {
        const auto v = j.value("variants", std::int64_t{16});
        if (v < 1) throw std::invalid_argument("operator.variants: must be >= 1");
        s.variants = static_cast<std::size_t>(v);
    }
    if (s.kind == OperatorKind::Mixed) {
        if (!j.contains("rho")) throw std::invalid_argument("operator.rho: required for kind mixed");
        s.rho = j.at("rho").get<double>();
        if (!(s.rho >= 0.0 && s.rho <= 1.0)) throw std::invalid_argument("operator.rho: must lie in [0, 1]");
        if (!j.contains("strong") || !j.contains("weak"))
            throw std::invalid_argument("operator: mixed needs 'strong' and 'weak' blocks");
        s.strong = std::make_shared<OperatorSpec>(from_json(j.at("strong")));
        s.weak = std::make_shared<OperatorSpec>(from_json(j.at("weak")));
    }
    return s;
}

nlohmann::json OperatorSpec::to_json() const {
    nlohmann::json j = {{"kind", to_string(kind)}};
    switch (kind) {
        case OperatorKind::Llm:
            j["model"] = model;
            j["temperature"] = temperature;
            break;
        case OperatorKind::Subtree: j["variants"] = variants; break;
        case OperatorKind::Mixed:
            j["rho"] = rho;
            j["strong"] = strong->to_json();
            j["weak"] = weak->to_json();
            break;
        default: break;
    }
    return j;
}

bool OperatorSpec::uses_llm() const {
    if (kind == OperatorKind::Llm) return true;
    if (kind == OperatorKind::Mixed) return strong->uses_llm() || weak->uses_llm();
    return false;
}

std::unique_ptr<MutationOperator> make_operator(const OperatorSpec& spec, const OperatorContext& ctx) {
    if (!ctx.task) throw std::invalid_argument("make_operator: no task");
    const Task& task = *ctx.task;
    switch (spec.kind) {
        case OperatorKind::TwoOpt: return std::make_unique<TwoOptOperator>(task);
        case OperatorKind::Subtree: return std::make_unique<SubtreeOperator>(task, spec.variants);
        case OperatorKind::Shuffle: return std::make_unique<ShuffleOperator>(task);
        case OperatorKind::Llm:
            if (!ctx.gateway || !ctx.prompts) throw std::invalid_argument("llm operator needs a gateway and prompts");
            return std::make_unique<LlmOperator>(task, ctx.gateway, *ctx.prompts, spec.model, spec.temperature,
                                                 ctx.run_id);
        case OperatorKind::Mixed:
            return std::make_unique<MixedOperator>(make_operator(*spec.strong, ctx), make_operator(*spec.weak, ctx),
                                                   spec.rho);
    }
    throw std::invalid_argument("make_operator: unknown kind");
}

nlohmann::json ZeroShotResult::to_json() const {
    nlohmann::json samples_json = nlohmann::json::array();
    for (const auto& s : samples) {
        nlohmann::json row = {{"temperature", s.temperature}, {"valid", s.valid}, {"raw_fitness", s.raw_fitness},
                              {"genome", s.serialized}, {"failure", s.failure}};
        row["exchange_index"] = s.exchange_index ? nlohmann::json(*s.exchange_index) : nlohmann::json(nullptr);
        samples_json.push_back(std::move(row));
    }
    return {{"model", model}, {"task_id", task_id}, {"best", best}, {"all_invalid", all_invalid},
            {"calls", samples.size()}, {"samples", samples_json}};
}

ZeroShotResult zero_shot_best_of_n(const Task& task, llm::Gateway& gateway, const PromptLibrary& prompts,
                                   const std::string& model, const std::string& run_id) {
    const PromptTemplate& tmpl = prompts.get(task.family(), PromptMode::ZeroShot);
    const auto fields = task.prompt_fields(PromptMode::ZeroShot);
    const std::vector<llm::Message> messages = {{"system", render(tmpl.system, fields)},
                                                {"user", render(tmpl.user, fields)}};
    ZeroShotResult result;
    result.model = model;
    result.task_id = task.id();
    result.best = task.invalid_fitness();
    for (double temperature : kZeroShotTemperatures) {
        for (int k = 0; k < kZeroShotPerTemperature; ++k) {
            ZeroShotSample s;
            s.temperature = temperature;
            s.raw_fitness = task.invalid_fitness();
            try {
                const auto res = gateway.chat(model, messages, temperature, run_id);
                s.exchange_index = res.ledger_index;
                const Genome g = task.normalize(extract_genome(res.exchange.reply, task));
                s.serialized = task.serialize(g);
                const Evaluation ev = task.evaluate(g);
                s.valid = ev.valid;
                if (ev.valid) s.raw_fitness = ev.raw_fitness;
                else s.failure = failure::kInvalidGenome;
            } catch (const llm::TransportError& e) {
                s.failure = failure::kTransport;
                s.exchange_index = e.ledger_index();
            } catch (const ExtractionError&) {
                s.failure = failure::kParse;
            } catch (const InvalidGenome&) {
                s.failure = failure::kInvalidGenome;
            }
            if (s.valid) {
                result.best = result.all_invalid ? s.raw_fitness : std::max(result.best, s.raw_fitness);
                result.all_invalid = false;
            }
            result.samples.push_back(std::move(s));
        }
    }
    return result;
}

}  // namespace evoscope::ops

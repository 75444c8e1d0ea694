#include "evoscope/llm/gateway.hpp"

#include <chrono>
#include <fstream>
#include <thread>

namespace evoscope::llm {

nlohmann::json ChatExchange::to_json() const {
    return {{"run_id", run_id},
            {"model", model},
            {"system", system},
            {"user", user},
            {"temperature", temperature},
            {"reply", reply},
            {"prompt_tokens", prompt_tokens},
            {"completion_tokens", completion_tokens},
            {"usage_estimated", usage_estimated},
            {"latency_ms", latency_ms},
            {"attempts", attempts},
            {"ok", ok},
            {"error", error}};
}

ChatExchange ChatExchange::from_json(const nlohmann::json& j) {
    ChatExchange ex;
    ex.run_id = j.value("run_id", std::string{});
    ex.model = j.at("model").get<std::string>();
    ex.system = j.value("system", std::string{});
    ex.user = j.value("user", std::string{});
    ex.temperature = j.value("temperature", 0.0);
    ex.reply = j.value("reply", std::string{});
    ex.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
    ex.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    ex.usage_estimated = j.value("usage_estimated", false);
    ex.latency_ms = j.value("latency_ms", 0.0);
    ex.attempts = j.value("attempts", 0);
    ex.ok = j.value("ok", false);
    ex.error = j.value("error", std::string{});
    return ex;
}

std::int64_t estimate_tokens(const std::string& text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::unique_ptr<MockBackend> MockBackend::from_lines(std::vector<nlohmann::json> lines) {
    if (lines.empty()) throw ConfigurationError("mock reply table is empty");
    auto table = std::make_shared<std::vector<nlohmann::json>>(std::move(lines));
    auto cursor = std::make_shared<std::size_t>(0);
    auto mu = std::make_shared<std::mutex>();
    return std::make_unique<MockBackend>([table, cursor, mu](const nlohmann::json&) {
        nlohmann::json line;
        {
            std::lock_guard lock(*mu);
            line = (*table)[*cursor % table->size()];
            ++*cursor;
        }
        BackendReply r;
        r.status = line.value("status", 200);
        if (r.status == 200) {
            r.body = completion_body(line.value("reply", std::string{}), line.value("usage", nlohmann::json(nullptr)));
        } else {
            r.body = line.value("body", std::string{"{\"error\":\"scripted failure\"}"});
        }
        return r;
    });
}

std::unique_ptr<MockBackend> MockBackend::from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open mock replies file '" + path + "'");
    std::vector<nlohmann::json> lines;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            lines.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigurationError("mock replies line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return from_lines(std::move(lines));
}

BackendReply MockBackend::post(const nlohmann::json& request) {
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    return responder_(request);
}

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::string MockBackend::completion_body(const std::string& content, const nlohmann::json& usage) {
    nlohmann::json body = {{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
    if (!usage.is_null()) body["usage"] = usage;
    return body.dump();
}

std::size_t Ledger::append(ChatExchange ex) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(ex));
    return entries_.size() - 1;
}

std::vector<ChatExchange> Ledger::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t Ledger::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry, std::size_t per_model_cap, int max_tokens)
    : backend_(std::move(backend)), retry_(std::move(retry)), per_model_cap_(per_model_cap), max_tokens_(max_tokens) {
    if (!backend_) throw ConfigurationError("gateway needs a backend");
    if (per_model_cap_ == 0) per_model_cap_ = 1;
    if (!retry_.sleep) retry_.sleep = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

void Gateway::acquire(const std::string& model) {
    std::unique_lock lock(slot_mu_);
    slot_cv_.wait(lock, [&] { return in_flight_[model] < per_model_cap_; });
    auto& n = ++in_flight_[model];
    peak_[model] = std::max(peak_[model], n);
}

void Gateway::release(const std::string& model) {
    {
        std::lock_guard lock(slot_mu_);
        --in_flight_[model];
    }
    slot_cv_.notify_all();
}

std::size_t Gateway::peak_in_flight(const std::string& model) const {
    std::lock_guard lock(slot_mu_);
    auto it = peak_.find(model);
    return it == peak_.end() ? 0 : it->second;
}

namespace {

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

ChatResult Gateway::chat(const std::string& model, const std::vector<Message>& messages, double temperature,
                         const std::string& run_id) {
    ChatExchange ex;
    ex.run_id = run_id;
    ex.model = model;
    ex.temperature = temperature;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) {
        msgs.push_back({{"role", m.role}, {"content", m.content}});
        if (m.role == "system") ex.system += m.content;
        if (m.role == "user") ex.user += m.content;
    }
    const nlohmann::json request = {
        {"model", model}, {"messages", msgs}, {"temperature", temperature}, {"max_tokens", max_tokens_}};

    acquire(model);
    const auto start = std::chrono::steady_clock::now();
    BackendReply reply;
    std::string failure;
    for (int attempt = 0;; ++attempt) {
        ex.attempts = attempt + 1;
        try {
            reply = backend_->post(request);
        } catch (const std::exception& e) {
            reply = BackendReply{0, {}, e.what()};
        }
        if (reply.status == 200) break;
        failure = reply.status == 0 ? "transport failure: " + reply.error : "HTTP " + std::to_string(reply.status);
        if (!retryable(reply.status) || attempt >= retry_.max_retries) break;
        const auto& b = retry_.backoff_seconds;
        const double wait = b.empty() ? 0.0 : b[std::min<std::size_t>(static_cast<std::size_t>(attempt), b.size() - 1)];
        retry_.sleep(wait);
    }
    release(model);
    ex.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (reply.status == 200) {
        try {
            const auto body = nlohmann::json::parse(reply.body);
            ex.reply = body.at("choices").at(0).at("message").at("content").get<std::string>();
            const auto usage = body.value("usage", nlohmann::json(nullptr));
            if (usage.is_object() && usage.contains("prompt_tokens") && usage.contains("completion_tokens")) {
                ex.prompt_tokens = usage.at("prompt_tokens").get<std::int64_t>();
                ex.completion_tokens = usage.at("completion_tokens").get<std::int64_t>();
            } else {
                ex.prompt_tokens = estimate_tokens(ex.system) + estimate_tokens(ex.user);
                ex.completion_tokens = estimate_tokens(ex.reply);
                ex.usage_estimated = true;
            }
            ex.ok = true;
        } catch (const std::exception& e) {
            failure = std::string("malformed response body: ") + e.what();
        }
    }
    if (!ex.ok) {
        ex.error = failure;
        const std::size_t idx = ledger_.append(ex);
        throw TransportError(failure + " after " + std::to_string(ex.attempts) + " attempt(s)", idx);
    }
    ChatResult result{ex, 0};
    result.ledger_index = ledger_.append(std::move(ex));
    return result;
}

}  // namespace evoscope::llm

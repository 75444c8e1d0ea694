#pragma once

/// @file gateway.hpp
/// @brief Chat-completion transport with retries, a per-model in-flight cap
/// and an append-only exchange ledger.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace evoscope::llm {

struct Message {
    std::string role;
    std::string content;
};

/// One logical chat call, successful or not.
struct ChatExchange {
    std::string run_id;
    std::string model;
    std::string system;
    std::string user;
    double temperature = 0.0;
    std::string reply;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool usage_estimated = false;
    double latency_ms = 0.0;
    int attempts = 0;
    bool ok = false;
    std::string error;

    nlohmann::json to_json() const;
    static ChatExchange from_json(const nlohmann::json& j);
};

/// Raw response of one HTTP round trip. status 0 means the transport failed
/// before a status line was received.
struct BackendReply {
    int status = 0;
    std::string body;
    std::string error;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Sends one chat-completions request body.
    virtual BackendReply post(const nlohmann::json& request) = 0;
};

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, std::size_t ledger_index)
        : std::runtime_error(what), ledger_index_(ledger_index) {}
    std::size_t ledger_index() const noexcept { return ledger_index_; }

private:
    std::size_t ledger_index_;
};

inline constexpr const char* kUrlEnv = "EVOSCOPE_LLM_URL";
inline constexpr const char* kKeyEnv = "EVOSCOPE_LLM_KEY";

/// HTTP(S) backend posting to a chat-completions endpoint with a bearer token.
class HttpBackend final : public ChatBackend {
public:
    /// Throws ConfigurationError when url or key is empty or the url is malformed.
    HttpBackend(std::string url, std::string key);
    /// Reads EVOSCOPE_LLM_URL / EVOSCOPE_LLM_KEY.
    static std::unique_ptr<HttpBackend> from_env();

    BackendReply post(const nlohmann::json& request) override;

private:
    std::string scheme_host_port_;
    std::string path_;
    std::string key_;
};

/// Scripted replies for offline runs.
///
/// Each JSONL line is {"reply": "...", "status": 200, "usage": {...}}; only
/// "reply" is required. Lines are served in order and the table wraps
/// around when exhausted. A non-200 "status" line produces that HTTP status.
class MockBackend final : public ChatBackend {
public:
    using Responder = std::function<BackendReply(const nlohmann::json& request)>;

    explicit MockBackend(Responder responder) : responder_(std::move(responder)) {}
    static std::unique_ptr<MockBackend> from_lines(std::vector<nlohmann::json> lines);
    static std::unique_ptr<MockBackend> from_jsonl(const std::string& path);

    BackendReply post(const nlohmann::json& request) override;
    std::size_t calls() const;

    /// Wraps reply text in a chat-completions response body.
    static std::string completion_body(const std::string& content, const nlohmann::json& usage = nullptr);

private:
    Responder responder_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::vector<double> backoff_seconds = {1.0, 2.0, 4.0};
    /// Replaced in tests to avoid real sleeping.
    std::function<void(double)> sleep;
};

/// Thread-safe append-only record of every exchange.
class Ledger {
public:
    std::size_t append(ChatExchange ex);
    std::vector<ChatExchange> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<ChatExchange> entries_;
};

struct ChatResult {
    ChatExchange exchange;
    std::size_t ledger_index = 0;
};

class Gateway {
public:
    explicit Gateway(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {}, std::size_t per_model_cap = 4,
                     int max_tokens = 2048);

    /// Sends a chat request, retrying transport failures, 429 and 5xx with
    /// exponential backoff. Records the exchange in the ledger either way.
    /// Throws TransportError once retries are exhausted or on other 4xx.
    ChatResult chat(const std::string& model, const std::vector<Message>& messages, double temperature,
                    const std::string& run_id = {});

    Ledger& ledger() { return ledger_; }
    const Ledger& ledger() const { return ledger_; }
    std::size_t per_model_cap() const noexcept { return per_model_cap_; }
    /// Highest number of simultaneous in-flight calls observed for `model`.
    std::size_t peak_in_flight(const std::string& model) const;

private:
    void acquire(const std::string& model);
    void release(const std::string& model);

    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    std::size_t per_model_cap_;
    int max_tokens_;
    Ledger ledger_;

    mutable std::mutex slot_mu_;
    std::condition_variable slot_cv_;
    std::map<std::string, std::size_t> in_flight_;
    std::map<std::string, std::size_t> peak_;
};

/// ⌈chars / 4⌉, used when a provider omits usage counts.
std::int64_t estimate_tokens(const std::string& text);

}  // namespace evoscope::llm

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "evoscope/llm/gateway.hpp"

namespace evoscope::llm {

HttpBackend::HttpBackend(std::string url, std::string key) : key_(std::move(key)) {
    if (url.empty()) throw ConfigurationError(std::string("LLM endpoint URL is not configured (set ") + kUrlEnv + ")");
    if (key_.empty()) throw ConfigurationError(std::string("LLM credential is not configured (set ") + kKeyEnv + ")");
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigurationError("LLM endpoint URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::unique_ptr<HttpBackend> HttpBackend::from_env() {
    const char* url = std::getenv(kUrlEnv);
    const char* key = std::getenv(kKeyEnv);
    return std::make_unique<HttpBackend>(url ? url : "", key ? key : "");
}

BackendReply HttpBackend::post(const nlohmann::json& request) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(30);
    client.set_read_timeout(180);
    client.set_bearer_token_auth(key_);
    auto res = client.Post(path_, request.dump(), "application/json");
    if (!res) return BackendReply{0, {}, httplib::to_string(res.error())};
    return BackendReply{res->status, res->body, {}};
}

}  // namespace evoscope::llm

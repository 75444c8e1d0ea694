#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <thread>

#include "evoscope/llm/cost.hpp"
#include "evoscope/llm/gateway.hpp"

using namespace evoscope::llm;

namespace {

RetryPolicy recording_policy(std::vector<double>& waits) {
    RetryPolicy p;
    p.sleep = [&waits](double s) { waits.push_back(s); };
    return p;
}

const std::vector<Message> kHello = {{"system", "be brief"}, {"user", "hello"}};

ChatExchange exchange(std::string run, std::string model, std::int64_t in, std::int64_t out) {
    ChatExchange e;
    e.run_id = std::move(run);
    e.model = std::move(model);
    e.prompt_tokens = in;
    e.completion_tokens = out;
    e.ok = true;
    return e;
}

}  // namespace

TEST_SUITE("llm") {

TEST_CASE("mock reply passes through without retries") {
    std::vector<double> waits;
    Gateway g(MockBackend::from_lines({{{"reply", "pong"}, {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 2}}}}}),
              recording_policy(waits));
    const auto r = g.chat("m", kHello, 0.3, "run-1");
    CHECK(r.exchange.reply == "pong");
    CHECK(r.exchange.attempts == 1);
    CHECK(r.exchange.prompt_tokens == 7);
    CHECK(r.exchange.completion_tokens == 2);
    CHECK_FALSE(r.exchange.usage_estimated);
    CHECK(waits.empty());
    CHECK(g.ledger().size() == 1);
    CHECK(g.ledger().snapshot()[0].run_id == "run-1");
}

TEST_CASE("429 twice then success takes three attempts") {
    std::vector<double> waits;
    Gateway g(MockBackend::from_lines({{{"status", 429}}, {{"status", 429}}, {{"reply", "ok"}}}), recording_policy(waits));
    const auto r = g.chat("m", kHello, 0.0);
    CHECK(r.exchange.reply == "ok");
    CHECK(r.exchange.attempts == 3);
    CHECK(waits == std::vector<double>{1.0, 2.0});
}

TEST_CASE("persistent 500 exhausts three retries") {
    std::vector<double> waits;
    Gateway g(MockBackend::from_lines({{{"status", 500}}}), recording_policy(waits));
    try {
        g.chat("m", kHello, 0.0);
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.ledger_index() == 0);
    }
    CHECK(waits == std::vector<double>{1.0, 2.0, 4.0});
    const auto ex = g.ledger().snapshot().at(0);
    CHECK(ex.attempts == 4);
    CHECK_FALSE(ex.ok);
}

TEST_CASE("non-retryable client errors fail at once") {
    std::vector<double> waits;
    Gateway g(MockBackend::from_lines({{{"status", 401}}}), recording_policy(waits));
    CHECK_THROWS_AS(g.chat("m", kHello, 0.0), TransportError);
    CHECK(waits.empty());
}

TEST_CASE("missing usage is estimated from text length") {
    std::vector<double> waits;
    Gateway g(MockBackend::from_lines({{{"reply", "abcdefghi"}}}), recording_policy(waits));
    const auto r = g.chat("m", kHello, 0.0);
    CHECK(r.exchange.usage_estimated);
    CHECK(r.exchange.completion_tokens == 3);
    CHECK(r.exchange.prompt_tokens == estimate_tokens("be brief") + estimate_tokens("hello"));
}

TEST_CASE("per-model in-flight cap") {
    auto backend = std::make_shared<MockBackend>([](const nlohmann::json&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        return BackendReply{200, MockBackend::completion_body("x"), {}};
    });
    RetryPolicy p;
    p.sleep = [](double) {};
    Gateway g(backend, p, 2);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { g.chat("m", kHello, 0.0); });
    for (auto& t : threads) t.join();
    CHECK(g.peak_in_flight("m") <= 2);
    CHECK(g.peak_in_flight("m") >= 1);
    CHECK(backend->calls() == 8);
}

TEST_CASE("ledger round-trips through JSON") {
    auto e = exchange("r", "m", 10, 20);
    e.reply = "hi";
    e.temperature = 0.4;
    const auto back = ChatExchange::from_json(e.to_json());
    CHECK(back.run_id == "r");
    CHECK(back.model == "m");
    CHECK(back.reply == "hi");
    CHECK(back.prompt_tokens == 10);
    CHECK(back.completion_tokens == 20);
    CHECK(back.temperature == 0.4);
}

TEST_CASE("cost accounting") {
    PriceTable prices = PriceTable::from_json({{"a", {{"input", 1.0}, {"output", 2.0}}}});
    const std::vector<ChatExchange> one = {exchange("r", "a", 1000000, 1000000)};
    CHECK(cost_report(one, prices).total == doctest::Approx(3.0));
    CHECK(cost_report(std::vector<ChatExchange>{}, prices).total == 0.0);

    const std::vector<ChatExchange> mixed = {exchange("r", "a", 500000, 0), exchange("r", "b", 9, 9)};
    const auto rep = cost_report(mixed, prices);
    CHECK(rep.total == doctest::Approx(0.5));
    CHECK(rep.missing_prices == std::vector<std::string>{"b"});
    CHECK(rep.lines.size() == 2);
}

TEST_CASE("http backend configuration errors") {
    CHECK_THROWS_AS(HttpBackend("", "k"), ConfigurationError);
    CHECK_THROWS_AS(HttpBackend("http://host/v1", ""), ConfigurationError);
    CHECK_THROWS_AS(HttpBackend("host/v1", "k"), ConfigurationError);
}

TEST_CASE("http backend against a loopback server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        const auto body = nlohmann::json::parse(req.body);
        if (hits++ == 0) {
            res.status = 503;
            return;
        }
        res.set_content(MockBackend::completion_body("echo:" + body.at("model").get<std::string>(),
                                                     {{"prompt_tokens", 3}, {"completion_tokens", 4}}),
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto backend = std::make_shared<HttpBackend>("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions",
                                                 "secret");
    std::vector<double> waits;
    Gateway g(backend, recording_policy(waits));
    const auto r = g.chat("tiny", kHello, 0.0);
    server.stop();
    th.join();

    CHECK(r.exchange.reply == "echo:tiny");
    CHECK(r.exchange.attempts == 2);
    CHECK(r.exchange.prompt_tokens == 3);
    CHECK(seen_auth == "Bearer secret");
}

}  // TEST_SUITE

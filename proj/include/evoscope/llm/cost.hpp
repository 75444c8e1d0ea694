#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoscope/llm/gateway.hpp"

namespace evoscope::llm {

struct Price {
    double input_per_million = 0.0;
    double output_per_million = 0.0;
};

/// model id → price per 10^6 tokens. JSON: {"model": {"input": 1.0, "output": 2.0}, ...}
class PriceTable {
public:
    void set(const std::string& model, Price p);
    const Price* find(const std::string& model) const;

    static PriceTable from_json(const nlohmann::json& j);
    static PriceTable from_file(const std::string& path);

private:
    std::map<std::string, Price> prices_;
};

struct CostLine {
    std::string run_id;
    std::string model;
    std::size_t exchanges = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double cost = 0.0;
    bool priced = true;
};

struct CostReport {
    double total = 0.0;
    std::vector<CostLine> lines;               // one per (run, model)
    std::vector<std::string> missing_prices;   // models without a price, excluded from total

    double average_prompt_tokens(const std::string& model) const;
    double average_completion_tokens(const std::string& model) const;
};

/// Σ (prompt·p_in + completion·p_out) / 10^6 over priced exchanges.
CostReport cost_report(std::span<const ChatExchange> exchanges, const PriceTable& prices);

std::vector<ChatExchange> read_ledger(const std::string& path);

}  // namespace evoscope::llm

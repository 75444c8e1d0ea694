#include "evoscope/llm/cost.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace evoscope::llm {

void PriceTable::set(const std::string& model, Price p) {
    if (p.input_per_million < 0.0 || p.output_per_million < 0.0)
        throw std::invalid_argument("negative price for model '" + model + "'");
    prices_[model] = p;
}

const Price* PriceTable::find(const std::string& model) const {
    auto it = prices_.find(model);
    return it == prices_.end() ? nullptr : &it->second;
}

PriceTable PriceTable::from_json(const nlohmann::json& j) {
    PriceTable t;
    for (const auto& [model, p] : j.items()) t.set(model, Price{p.at("input").get<double>(), p.at("output").get<double>()});
    return t;
}

PriceTable PriceTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open price table '" + path + "'");
    return from_json(nlohmann::json::parse(in));
}

CostReport cost_report(std::span<const ChatExchange> exchanges, const PriceTable& prices) {
    CostReport report;
    std::map<std::pair<std::string, std::string>, CostLine> lines;
    std::set<std::string> missing;
    for (const auto& ex : exchanges) {
        auto& line = lines[{ex.run_id, ex.model}];
        line.run_id = ex.run_id;
        line.model = ex.model;
        ++line.exchanges;
        line.prompt_tokens += ex.prompt_tokens;
        line.completion_tokens += ex.completion_tokens;
    }
    for (auto& [key, line] : lines) {
        const Price* p = prices.find(line.model);
        if (!p) {
            line.priced = false;
            missing.insert(line.model);
        } else {
            line.cost = (static_cast<double>(line.prompt_tokens) * p->input_per_million +
                         static_cast<double>(line.completion_tokens) * p->output_per_million) /
                        1e6;
            report.total += line.cost;
        }
        report.lines.push_back(line);
    }
    report.missing_prices.assign(missing.begin(), missing.end());
    return report;
}

double CostReport::average_prompt_tokens(const std::string& model) const {
    std::int64_t tokens = 0;
    std::size_t n = 0;
    for (const auto& l : lines)
        if (l.model == model) {
            tokens += l.prompt_tokens;
            n += l.exchanges;
        }
    return n ? static_cast<double>(tokens) / static_cast<double>(n) : 0.0;
}

double CostReport::average_completion_tokens(const std::string& model) const {
    std::int64_t tokens = 0;
    std::size_t n = 0;
    for (const auto& l : lines)
        if (l.model == model) {
            tokens += l.completion_tokens;
            n += l.exchanges;
        }
    return n ? static_cast<double>(tokens) / static_cast<double>(n) : 0.0;
}

std::vector<ChatExchange> read_ledger(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open ledger '" + path + "'");
    std::vector<ChatExchange> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(ChatExchange::from_json(nlohmann::json::parse(line)));
    }
    return out;
}

}  // namespace evoscope::llm

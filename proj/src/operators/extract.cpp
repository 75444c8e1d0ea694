#include <regex>
#include <sstream>

#include "evoscope/operators/operators.hpp"
#include "evoscope/tasks/expression_task.hpp"

namespace evoscope::ops {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Balanced {...} spans in order of their opening brace, skipping braces
/// inside JSON strings.
std::optional<nlohmann::json> first_object_with(std::string_view text, const char* key) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                auto j = nlohmann::json::parse(text.substr(start, i - start + 1), nullptr, false);
                if (!j.is_discarded() && j.is_object() && j.contains(key)) return j;
                break;
            }
        }
    }
    return std::nullopt;
}

std::optional<std::vector<int>> first_int_list(const std::string& text) {
    static const std::regex list_re(R"(\[\s*-?\d+(?:\s*,\s*-?\d+)*\s*,?\s*\])");
    std::smatch m;
    if (!std::regex_search(text, m, list_re)) return std::nullopt;
    static const std::regex int_re(R"(-?\d+)");
    std::vector<int> out;
    const std::string body = m.str();
    for (auto it = std::sregex_iterator(body.begin(), body.end(), int_re); it != std::sregex_iterator(); ++it) {
        try {
            out.push_back(std::stoi(it->str()));
        } catch (const std::out_of_range&) {
            return std::nullopt;
        }
    }
    return out;
}

Tour extract_tour(std::string_view text) {
    if (auto obj = first_object_with(text, "genome")) {
        const auto& g = obj->at("genome");
        if (g.is_array()) {
            Tour t;
            for (const auto& v : g) {
                if (!v.is_number_integer()) throw ExtractionError("genome array holds a non-integer entry");
                t.order.push_back(v.get<int>());
            }
            return t;
        }
        if (g.is_string()) {
            if (auto list = first_int_list(g.get<std::string>())) return Tour{*list};
        }
        throw ExtractionError("\"genome\" value is not an integer list");
    }
    if (auto list = first_int_list(std::string(text))) return Tour{*list};
    throw ExtractionError("no tour found in reply");
}

std::string expression_source(std::string_view text) {
    if (auto open = text.find("```"); open != std::string_view::npos) {
        auto body_start = text.find('\n', open + 3);
        body_start = body_start == std::string_view::npos ? text.size() : body_start + 1;
        const auto close = text.find("```", body_start);
        return std::string(text.substr(body_start, close == std::string_view::npos ? std::string_view::npos
                                                                                 : close - body_start));
    }
    if (auto obj = first_object_with(text, "code"); obj && obj->at("code").is_string())
        return obj->at("code").get<std::string>();
    return std::string(text);
}

std::string strip_wrapper(const std::string& source) {
    static const std::regex assign_re(R"(^[A-Za-z_]\w*\s*=(?!=)\s*)");
    std::vector<std::string> kept;
    std::istringstream in(source);
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::string t = trim(line);
        if (t.empty() || t.starts_with("import ") || t.starts_with("from ") || t.starts_with("def ") ||
            t.starts_with("@") || t.starts_with("\"\"\"") || t.starts_with("'''"))
            continue;
        if (t.starts_with("return ")) return trim(std::string_view(t).substr(7));
        if (t == "return") continue;
        kept.push_back(std::move(t));
    }
    std::string joined;
    for (const auto& k : kept) joined += (joined.empty() ? "" : " ") + k;
    while (!joined.empty() && joined.back() == ';') joined.pop_back();
    if (kept.size() == 1) joined = std::regex_replace(joined, assign_re, "", std::regex_constants::format_first_only);
    return trim(joined);
}

}  // namespace

Genome extract_genome(std::string_view text, const Task& task) {
    if (trim(text).empty()) throw ExtractionError("empty reply");
    if (task.family() == TaskFamily::Tsp) return extract_tour(text);

    const auto* et = dynamic_cast<const ExpressionTask*>(&task);
    if (!et) throw ExtractionError("task has no genome extractor");
    std::string src = strip_wrapper(expression_source(text));
    while (!src.empty() && src.back() == ';') src.pop_back();
    if (src.empty()) throw ExtractionError("no expression found in reply");
    try {
        return expr::parse(src, et->variable_set());
    } catch (const expr::ParseError& e) {
        throw ExtractionError(e.what());
    }
}

}  // namespace evoscope::ops

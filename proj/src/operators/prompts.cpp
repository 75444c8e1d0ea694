#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "evoscope/operators/operators.hpp"

#ifndef EVOSCOPE_PROMPT_DIR
#define EVOSCOPE_PROMPT_DIR "prompts"
#endif

namespace evoscope::ops {

namespace {

std::string rstrip_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

PromptTemplate parse_template(std::string_view text) {
    PromptTemplate t;
    std::string* section = nullptr;
    bool saw_user = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "[system]") {
            section = &t.system;
            continue;
        }
        if (line == "[user]") {
            section = &t.user;
            saw_user = true;
            continue;
        }
        if (!section) {
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            throw std::invalid_argument("prompt template text before the first [system]/[user] header");
        }
        *section += line;
        *section += '\n';
    }
    if (!saw_user) throw std::invalid_argument("prompt template has no [user] section");
    t.system = rstrip_newlines(std::move(t.system));
    t.user = rstrip_newlines(std::move(t.user));
    return t;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& fields) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{' && i + 1 < tmpl.size() && ident_start(tmpl[i + 1])) {
            std::size_t j = i + 1;
            while (j < tmpl.size() && ident_char(tmpl[j])) ++j;
            if (j < tmpl.size() && tmpl[j] == '}') {
                auto it = fields.find(std::string(tmpl.substr(i + 1, j - i - 1)));
                if (it != fields.end()) {
                    out += it->second;
                    i = j + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

PromptLibrary::PromptLibrary(std::filesystem::path dir) : dir_(std::move(dir)) {
    for (TaskFamily f : {TaskFamily::Tsp, TaskFamily::Symreg, TaskFamily::Binpack}) {
        for (PromptMode m : {PromptMode::Evolve, PromptMode::ZeroShot}) {
            const auto path = dir_ / (std::string(to_string(f)) + (m == PromptMode::Evolve ? "_evolve.txt" : "_zeroshot.txt"));
            std::ifstream in(path);
            if (!in) continue;
            std::stringstream buf;
            buf << in.rdbuf();
            try {
                templates_[{f, m}] = parse_template(buf.str());
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument(path.string() + ": " + e.what());
            }
        }
    }
    if (templates_.empty()) throw std::invalid_argument("no prompt templates found in '" + dir_.string() + "'");
}

const PromptTemplate& PromptLibrary::get(TaskFamily family, PromptMode mode) const {
    auto it = templates_.find({family, mode});
    if (it == templates_.end())
        throw std::invalid_argument("missing prompt template " + std::string(to_string(family)) +
                                    (mode == PromptMode::Evolve ? "_evolve.txt" : "_zeroshot.txt") + " in '" +
                                    dir_.string() + "'");
    return it->second;
}

std::filesystem::path PromptLibrary::default_dir() {
    if (const char* env = std::getenv("EVOSCOPE_PROMPT_DIR"); env && *env) return env;
    return EVOSCOPE_PROMPT_DIR;
}

std::string format_parents(const Task& task, const std::vector<ParentInfo>& parents) {
    std::string out;
    for (const auto& p : parents) {
        if (!out.empty()) out += '\n';
        out += task.format_parent(p.genome, p.raw_fitness);
    }
    return out;
}

}  // namespace evoscope::ops

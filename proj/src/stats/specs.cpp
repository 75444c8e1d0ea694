#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "evoscope/stats/stats.hpp"

namespace evoscope::stats {

namespace {

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

double to_double(const std::string& s, const std::string& column, std::size_t row) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    if (b < e && *b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
        throw std::invalid_argument("column '" + column + "' row " + std::to_string(row + 1) + ": not a number: '" + s + "'");
    return v;
}

std::vector<double> zscore_named(std::span<const double> v, const std::string& name) {
    try {
        return zscore(v);
    } catch (const ConstantColumn&) {
        throw ConstantColumn("column '" + name + "' is constant; cannot z-score");
    }
}

void require(const DataFrame& df, const std::vector<std::string>& cols, const std::string& what) {
    std::vector<std::string> missing;
    for (const auto& c : cols)
        if (!df.has(c)) missing.push_back(c);
    if (missing.empty()) return;
    std::string msg = what + ": missing column(s):";
    for (const auto& m : missing) msg += " " + m;
    throw ColumnGap(msg);
}

/// Indicator columns for every level but the first (sorted) one.
void add_task_indicators(const std::vector<std::string>& task, std::vector<std::vector<double>>& cols,
                         std::vector<std::string>& names) {
    std::set<std::string> levels(task.begin(), task.end());
    bool first = true;
    for (const auto& level : levels) {
        if (first) {
            first = false;
            continue;
        }
        std::vector<double> col(task.size());
        for (std::size_t i = 0; i < task.size(); ++i) col[i] = task[i] == level ? 1.0 : 0.0;
        cols.push_back(std::move(col));
        names.push_back("task[T." + level + "]");
    }
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& cols, std::size_t n) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size() + 1));
    x.col(0).setOnes();
    for (std::size_t k = 0; k < cols.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k + 1)) = cols[k][i];
    return x;
}

const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> a = {{"avg_breakthrough_rate", "breakthrough_rate"}};
    return a;
}

std::string source_column(const DataFrame& df, const std::string& name) {
    if (df.has(name)) return name;
    if (auto it = aliases().find(name); it != aliases().end() && df.has(it->second)) return it->second;
    return name;
}

}  // namespace

DataFrame DataFrame::parse_csv(const std::string& text) {
    auto rows = split_csv(text);
    if (rows.empty()) throw std::invalid_argument("csv: no header row");
    DataFrame df;
    df.columns_ = std::move(rows.front());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != df.columns_.size())
            throw std::invalid_argument("csv: row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                                        " cells, header has " + std::to_string(df.columns_.size()));
        df.rows_.push_back(std::move(rows[i]));
    }
    return df;
}

DataFrame DataFrame::read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_csv(buf.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

bool DataFrame::has(const std::string& column) const {
    return std::find(columns_.begin(), columns_.end(), column) != columns_.end();
}

std::size_t DataFrame::index(const std::string& column) const {
    auto it = std::find(columns_.begin(), columns_.end(), column);
    if (it == columns_.end()) throw ColumnGap("missing column '" + column + "'");
    return static_cast<std::size_t>(it - columns_.begin());
}

std::vector<std::string> DataFrame::text(const std::string& column) const {
    const std::size_t k = index(column);
    std::vector<std::string> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r[k]);
    return out;
}

std::vector<double> DataFrame::numeric(const std::string& column) const {
    const std::size_t k = index(column);
    std::vector<double> out;
    out.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) out.push_back(to_double(rows_[i][k], column, i));
    return out;
}

void DataFrame::add_column(const std::string& name, std::vector<std::string> values) {
    if (has(name)) throw std::invalid_argument("duplicate column '" + name + "'");
    if (!rows_.empty() && values.size() != rows_.size()) throw std::invalid_argument("column length mismatch");
    if (rows_.empty()) rows_.resize(values.size());
    columns_.push_back(name);
    for (std::size_t i = 0; i < values.size(); ++i) rows_[i].push_back(std::move(values[i]));
}

void DataFrame::append_row(std::vector<std::string> row) {
    if (row.size() != columns_.size()) throw std::invalid_argument("row length does not match header");
    rows_.push_back(std::move(row));
}

std::string DataFrame::to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += quote(cells[i]);
        }
        out += '\n';
    };
    line(columns_);
    for (const auto& r : rows_) line(r);
    return out;
}

const std::vector<OlsSpec>& ols_specs() {
    static const std::vector<OlsSpec> specs = {
        {"M1", {"avg_novelty"}},
        {"M2", {"initial_nov"}},
        {"M3", {"zero_shot_perf"}},
        {"M4", {"zero_shot_perf", "avg_novelty"}},
        {"M5", {"zero_shot_perf", "initial_nov"}},
        {"M6", {"avg_breakthrough_rate"}},
        {"M7", {"zero_shot_perf"}},
        {"M8", {"zero_shot_perf", "avg_breakthrough_rate"}},
    };
    return specs;
}

RegressionResult fit_ols_spec(const DataFrame& descriptors, const std::string& spec_name) {
    const auto& specs = ols_specs();
    auto spec = std::find_if(specs.begin(), specs.end(), [&](const OlsSpec& s) { return s.name == spec_name; });
    if (spec == specs.end()) throw std::invalid_argument("unknown OLS spec '" + spec_name + "' (expected M1..M8)");

    std::vector<std::string> sources;
    for (const auto& p : spec->predictors) sources.push_back(source_column(descriptors, p));
    std::vector<std::string> needed = {"model", "task", "best_final_fitness"};
    needed.insert(needed.end(), sources.begin(), sources.end());
    require(descriptors, needed, "spec " + spec_name);

    // Average repeated runs per (model, task).
    const auto model = descriptors.text("model");
    const auto task = descriptors.text("task");
    std::vector<std::vector<double>> raw;
    raw.push_back(descriptors.numeric("best_final_fitness"));
    for (const auto& s : sources) raw.push_back(descriptors.numeric(s));
    std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::size_t>> cells;
    for (std::size_t i = 0; i < model.size(); ++i) {
        auto& [sum, count] = cells[{model[i], task[i]}];
        if (sum.empty()) sum.assign(raw.size(), 0.0);
        for (std::size_t k = 0; k < raw.size(); ++k) sum[k] += raw[k][i];
        ++count;
    }
    std::vector<std::string> m_col, t_col;
    std::vector<std::vector<double>> agg(raw.size());
    for (const auto& [key, v] : cells) {
        m_col.push_back(key.first);
        t_col.push_back(key.second);
        for (std::size_t k = 0; k < raw.size(); ++k) agg[k].push_back(v.first[k] / static_cast<double>(v.second));
    }
    const std::size_t n = m_col.size();

    std::vector<std::string> warnings;
    std::map<std::string, std::vector<std::size_t>> by_task;
    for (std::size_t i = 0; i < n; ++i) by_task[t_col[i]].push_back(i);
    auto within_task = [&](const std::vector<double>& values, const std::string& name) {
        std::vector<double> out(n, 0.0);
        for (const auto& [t, rows] : by_task) {
            std::vector<double> v;
            for (auto i : rows) v.push_back(values[i]);
            try {
                const auto z = zscore(v);
                for (std::size_t k = 0; k < rows.size(); ++k) out[rows[k]] = z[k];
            } catch (const ConstantColumn&) {
                warnings.push_back("task '" + t + "': " + name + " constant or single row; set to 0");
            }
        }
        return out;
    };
    // Response and zero-shot performance live on per-task fitness scales, so
    // both are standardized within task. Other predictors across the table.
    const auto y = within_task(agg[0], "best_final_fitness");

    std::vector<std::vector<double>> cols;
    std::vector<std::string> names = {"Intercept"};
    for (std::size_t k = 0; k < spec->predictors.size(); ++k) {
        const auto& p = spec->predictors[k];
        if (p == "zero_shot_perf") {
            cols.push_back(within_task(agg[k + 1], p));
            if (std::all_of(cols.back().begin(), cols.back().end(), [](double v) { return v == 0.0; }))
                throw ConstantColumn("predictor zero_shot_perf is constant within every task");
        } else {
            cols.push_back(zscore_named(agg[k + 1], p));
        }
        names.push_back(p + "_z");
    }
    add_task_indicators(t_col, cols, names);

    DesignMatrix d;
    d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
    d.x = to_matrix(cols, n);
    d.names = names;
    d.clusters = m_col;
    auto r = ols_fit(d);
    r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
    return r;
}

RegressionResult fit_mixed_spec(const DataFrame& generations, const std::string& spec_name) {
    if (spec_name != "concurrent" && spec_name != "lagged")
        throw std::invalid_argument("unknown mixed spec '" + spec_name + "' (expected concurrent or lagged)");
    require(generations,
            {"model", "task", "run_id", "generation", "prob_breakthrough", "mean_novelty", "max_novelty", "h_spatial",
             "h_fitness"},
            "spec " + spec_name);
    const auto model = generations.text("model");
    const auto task = generations.text("task");
    const auto run = generations.text("run_id");
    const auto gen = generations.numeric("generation");
    const auto pb = generations.numeric("prob_breakthrough");
    const auto mn = generations.numeric("mean_novelty");
    const auto mx = generations.numeric("max_novelty");
    const auto hs = generations.numeric("h_spatial");
    const auto hf = generations.numeric("h_fitness");

    std::vector<std::size_t> order(model.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return run[a] != run[b] ? run[a] < run[b] : gen[a] < gen[b];
    });

    std::vector<std::size_t> rows;
    std::vector<double> y;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t i = order[k];
        if (spec_name == "concurrent") {
            rows.push_back(i);
            y.push_back(pb[i]);
        } else if (k + 1 < order.size() && run[order[k + 1]] == run[i] && gen[order[k + 1]] == gen[i] + 1) {
            rows.push_back(i);
            y.push_back(pb[order[k + 1]]);
        }
    }
    auto pick = [&](const std::vector<double>& v) {
        std::vector<double> out;
        for (auto i : rows) out.push_back(v[i]);
        return out;
    };
    std::vector<std::string> groups, tasks;
    for (auto i : rows) {
        groups.push_back(model[i]);
        tasks.push_back(task[i]);
    }

    const auto yz = zscore_named(y, spec_name == "lagged" ? "prob_breakthrough_t+1" : "prob_breakthrough");
    const auto hfz = zscore_named(pick(hf), "h_fitness");
    const auto hsz = zscore_named(pick(hs), "h_spatial");
    const auto mnz = zscore_named(pick(mn), "mean_novelty");
    const auto mxz = zscore_named(pick(mx), "max_novelty");
    const auto inter = interaction_z(mnz, hsz);
    const auto gz = zscore_named(pick(gen), "generation");

    std::vector<std::vector<double>> cols = {hfz, hsz, mnz, mxz, inter, gz};
    std::vector<std::string> names = {"Intercept", "H_fitness_z", "H_spatial_z", "mean_novelty_z",
                                      "max_novelty_z", "mean_novelty_z:H_spatial_z", "generation_z"};
    add_task_indicators(tasks, cols, names);

    MixedDesign d;
    d.y = Eigen::Map<const Eigen::VectorXd>(yz.data(), static_cast<Eigen::Index>(yz.size()));
    d.x = to_matrix(cols, rows.size());
    d.names = names;
    d.groups = groups;
    return mixed_fit(d);
}

}  // namespace evoscope::stats

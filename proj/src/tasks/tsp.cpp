#include "evoscope/tasks/tsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "evoscope/core/rng.hpp"

namespace evoscope::tsp {

Instance Instance::random(int n, std::uint64_t seed) {
    if (n < 3) throw std::invalid_argument("TSP instance needs at least 3 cities");
    Rng rng(derive_seed({seed, 0x7473702d696e7374ULL}));
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = rng.uniform(0.0, 100.0);
        ys[i] = rng.uniform(0.0, 100.0);
    }
    Instance inst;
    inst.n = n;
    inst.seed = seed;
    inst.dist.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) inst.dist[i][j] = inst.dist[j][i] = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
    return inst;
}

Instance Instance::from_json(const nlohmann::json& j) {
    Instance inst;
    inst.dist = j.at("dist").get<std::vector<std::vector<double>>>();
    inst.n = j.contains("n") ? j.at("n").get<int>() : static_cast<int>(inst.dist.size());
    inst.seed = j.value("seed", std::uint64_t{0});
    inst.validate();
    return inst;
}

nlohmann::json Instance::to_json() const { return {{"n", n}, {"dist", dist}, {"seed", seed}}; }

void Instance::validate() const {
    if (n < 3) throw std::invalid_argument("TSP instance needs at least 3 cities");
    if (dist.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("distance matrix has wrong row count");
    for (int i = 0; i < n; ++i) {
        if (dist[i].size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("distance matrix row " + std::to_string(i) + " has wrong length");
        if (dist[i][i] != 0.0) throw std::invalid_argument("distance matrix diagonal must be zero");
        for (int j = 0; j < n; ++j) {
            if (!(dist[i][j] >= 0.0) || !std::isfinite(dist[i][j]))
                throw std::invalid_argument("distance matrix entries must be finite and nonnegative");
            if (dist[i][j] != dist[j][i]) throw std::invalid_argument("distance matrix must be symmetric");
        }
    }
}

bool is_permutation(const Tour& t, int n) {
    if (t.order.size() != static_cast<std::size_t>(n)) return false;
    std::vector<char> seen(n, 0);
    for (int c : t.order) {
        if (c < 0 || c >= n || seen[c]) return false;
        seen[c] = 1;
    }
    return true;
}

double tour_length(const Tour& t, const Instance& inst) {
    if (!is_permutation(t, inst.n)) throw InvalidGenome("tour is not a permutation of 0.." + std::to_string(inst.n - 1));
    double len = 0.0;
    const auto& o = t.order;
    for (std::size_t i = 0; i + 1 < o.size(); ++i) len += inst.dist[o[i]][o[i + 1]];
    len += inst.dist[o.back()][o.front()];
    return len;
}

double fitness(const Tour& t, const Instance& inst) { return -tour_length(t, inst); }

std::vector<std::int64_t> edge_keys(const Tour& t) {
    const auto n = static_cast<std::int64_t>(t.order.size());
    std::vector<std::int64_t> keys;
    keys.reserve(t.order.size());
    for (std::size_t i = 0; i < t.order.size(); ++i) {
        const std::int64_t a = t.order[i];
        const std::int64_t b = t.order[(i + 1) % t.order.size()];
        keys.push_back(std::min(a, b) * n + std::max(a, b));
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

namespace {

double edge_key_distance(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
    std::size_t shared = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++shared;
            ++ia;
            ++ib;
        }
    }
    return 1.0 - static_cast<double>(shared) / static_cast<double>(a.size());
}

const Tour& expect_tour(const Genome& g) {
    const Tour* t = as_tour(g);
    if (!t) throw InvalidGenome("expected a tour genome");
    return *t;
}

std::string format_number(double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

}  // namespace

double edge_distance(const Tour& a, const Tour& b) {
    if (a.order.size() != b.order.size()) throw std::invalid_argument("tours have different city counts");
    if (a.order.empty()) return 0.0;
    return edge_key_distance(edge_keys(a), edge_keys(b));
}

Tour canonical(const Tour& t) {
    const auto& o = t.order;
    const std::size_t n = o.size();
    if (n == 0) return t;
    const auto start = static_cast<std::size_t>(std::find(o.begin(), o.end(), 0) - o.begin());
    if (start == n) return t;
    Tour out;
    out.order.reserve(n);
    const bool forward = n < 3 || o[(start + 1) % n] <= o[(start + n - 1) % n];
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = forward ? (start + k) % n : (start + n - k) % n;
        out.order.push_back(o[idx]);
    }
    return out;
}

Tour two_opt_move(const Tour& t, std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    if (j >= t.order.size()) throw std::out_of_range("2-opt segment outside tour");
    Tour out = t;
    std::reverse(out.order.begin() + static_cast<std::ptrdiff_t>(i), out.order.begin() + static_cast<std::ptrdiff_t>(j) + 1);
    return out;
}

double two_opt_delta(const Tour& t, const Instance& inst, std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    const std::size_t n = t.order.size();
    if (j - i + 1 >= n - 1 || i == j) return 0.0;
    const int a = t.order[(i + n - 1) % n];
    const int b = t.order[i];
    const int c = t.order[j];
    const int d = t.order[(j + 1) % n];
    const auto& D = inst.dist;
    return D[a][c] + D[b][d] - D[a][b] - D[c][d];
}

double brute_force_optimum(const Instance& inst) {
    if (inst.n > 11) throw std::invalid_argument("brute force limited to n <= 11");
    std::vector<int> rest(inst.n - 1);
    std::iota(rest.begin(), rest.end(), 1);
    double best = std::numeric_limits<double>::infinity();
    Tour t;
    do {
        t.order.assign(1, 0);
        t.order.insert(t.order.end(), rest.begin(), rest.end());
        best = std::min(best, tour_length(t, inst));
    } while (std::next_permutation(rest.begin(), rest.end()));
    return best;
}

TspTask::TspTask(Instance inst, std::string id) : inst_(std::move(inst)), id_(std::move(id)) {
    inst_.validate();
    if (id_.empty()) id_ = "tsp-n" + std::to_string(inst_.n) + "-s" + std::to_string(inst_.seed);
    double max_d = 0.0;
    for (const auto& row : inst_.dist)
        for (double d : row) max_d = std::max(max_d, d);
    invalid_fitness_ = -(static_cast<double>(inst_.n) * max_d) - 1.0;
}

std::vector<Genome> TspTask::initial_population(std::size_t n_init) const {
    Rng rng(derive_seed({inst_.seed, 0x696e69742d706f70ULL}));
    std::vector<Genome> out;
    out.reserve(n_init);
    for (std::size_t k = 0; k < n_init; ++k) {
        Tour t;
        t.order.resize(inst_.n);
        std::iota(t.order.begin(), t.order.end(), 0);
        rng.shuffle(t.order);
        out.emplace_back(std::move(t));
    }
    return out;
}

Evaluation TspTask::evaluate(const Genome& g) const {
    const Tour* t = as_tour(g);
    if (!t || !is_permutation(*t, inst_.n)) return {false, invalid_fitness_};
    return {true, fitness(*t, inst_)};
}

std::string TspTask::serialize(const Genome& g) const {
    const Tour& t = expect_tour(g);
    return nlohmann::json(canonical(t).order).dump();
}

Genome TspTask::deserialize(std::string_view text) const {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception&) {
        throw InvalidGenome("tour is not a JSON array");
    }
    if (!j.is_array()) throw InvalidGenome("tour is not a JSON array");
    Tour t;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw InvalidGenome("tour entries must be integers");
        t.order.push_back(v.get<int>());
    }
    if (!is_permutation(t, inst_.n)) throw InvalidGenome("tour is not a permutation of 0.." + std::to_string(inst_.n - 1));
    return canonical(t);
}

double TspTask::distance(const Genome& a, const Genome& b) const { return edge_distance(expect_tour(a), expect_tour(b)); }

DistanceFn TspTask::distance_over(std::span<const Genome> genomes) const {
    auto keys = std::make_shared<std::vector<std::vector<std::int64_t>>>();
    keys->reserve(genomes.size());
    for (const auto& g : genomes) keys->push_back(edge_keys(expect_tour(g)));
    return [keys](std::size_t i, std::size_t j) { return edge_key_distance((*keys)[i], (*keys)[j]); };
}

nlohmann::json TspTask::instance_json() const {
    return {{"family", "tsp"}, {"id", id_}, {"instance", inst_.to_json()}};
}

std::map<std::string, std::string> TspTask::prompt_fields(PromptMode mode) const {
    nlohmann::json matrix = nlohmann::json::array();
    for (const auto& row : inst_.dist) {
        nlohmann::json r = nlohmann::json::array();
        for (double d : row) r.push_back(std::round(d * 100.0) / 100.0);
        matrix.push_back(std::move(r));
    }
    std::string desc = "The traveling salesman problem (TSP) aims to find the shortest route visiting all cities exactly once.";
    if (mode == PromptMode::ZeroShot) desc += " You must return a valid tour as a list of city indices.";
    return {{"task_desc", desc},
            {"question", matrix.dump()},
            {"n", std::to_string(inst_.n)},
            {"n_minus_1", std::to_string(inst_.n - 1)}};
}

std::string TspTask::format_parent(const Genome& g, double raw_fitness) const {
    return "{\"genome\": " + nlohmann::json(expect_tour(g).order).dump() + ", \"score\": " +
           format_number(-raw_fitness, "%.2f") + "}";
}

}  // namespace evoscope::tsp

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "evoscope/expr/expr.hpp"

namespace evoscope {

/// A TSP tour: a permutation of 0..n-1.
struct Tour {
    std::vector<int> order;
    friend bool operator==(const Tour&, const Tour&) = default;
};

using Genome = std::variant<Tour, expr::Expression>;

inline const Tour* as_tour(const Genome& g) { return std::get_if<Tour>(&g); }
inline const expr::Expression* as_expression(const Genome& g) { return std::get_if<expr::Expression>(&g); }

}  // namespace evoscope

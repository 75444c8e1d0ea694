#pragma once

/// @file expr.hpp
/// @brief Sandboxed arithmetic expression language used for equation and
/// heuristic genomes.
///
/// The grammar (see docs/grammar.ebnf) is standard infix with precedence
/// `^` > unary `-` > `* /` > `+ -`. `^` is right-associative and also
/// accepted as `**`. Function whitelist: sin cos exp log sqrt abs tanh.

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evoscope::expr {

enum class NodeKind { Constant, Variable, Unary, Binary, Call };

enum class BinaryOp { Add, Sub, Mul, Div, Pow };

enum class Function { Sin, Cos, Exp, Log, Sqrt, Abs, Tanh };

inline constexpr std::size_t kMaxDepth = 32;
inline constexpr std::size_t kMaxNodes = 512;

/// One AST node. Children are held by value; trees are small (≤ 512 nodes).
struct Node {
    NodeKind kind = NodeKind::Constant;
    double value = 0.0;         // Constant
    std::string name;           // Variable
    BinaryOp op = BinaryOp::Add;  // Binary
    Function fn = Function::Sin;  // Call
    std::vector<Node> children;   // Unary: 1, Binary: 2, Call: 1

    static Node constant(double v);
    static Node variable(std::string name);
    static Node negate(Node operand);
    static Node binary(BinaryOp op, Node lhs, Node rhs);
    static Node call(Function fn, Node arg);

    friend bool operator==(const Node&, const Node&) = default;
};

std::string_view function_name(Function fn);
char binary_symbol(BinaryOp op);
std::size_t depth(const Node& n);
std::size_t node_count(const Node& n);
/// Variables referenced by the tree.
std::set<std::string> variables(const Node& n);

/// Syntax or validation failure. `offset()` is a byte offset into the input.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnboundVariable : public std::runtime_error {
public:
    explicit UnboundVariable(const std::string& name)
        : std::runtime_error("unbound variable '" + name + "'"), name_(name) {}
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// Immutable, cheaply copyable expression handle.
class Expression {
public:
    Expression() = default;
    explicit Expression(Node root) : root_(std::make_shared<const Node>(std::move(root))) {}

    const Node& root() const { return *root_; }
    bool empty() const noexcept { return root_ == nullptr; }

private:
    std::shared_ptr<const Node> root_;
};

Expression parse(std::string_view text, const std::set<std::string>& allowed_vars);

/// Variable bindings for evaluation. Vector bindings must share one length;
/// scalars broadcast.
class EvalContext {
public:
    EvalContext& bind(const std::string& name, double v);
    EvalContext& bind(const std::string& name, std::vector<double> v);

    std::size_t length() const noexcept { return length_; }
    bool has(const std::string& name) const { return values_.count(name) != 0; }
    const std::vector<double>& get(const std::string& name) const;

private:
    std::map<std::string, std::vector<double>> values_;
    std::size_t length_ = 1;
    bool has_vector_ = false;
};

/// Elementwise evaluation. Domain violations produce NaN/Inf entries rather
/// than throwing. Throws UnboundVariable if the context lacks a variable.
std::vector<double> evaluate(const Expression& e, const EvalContext& ctx);
std::vector<double> evaluate(const Node& n, const EvalContext& ctx);

/// Deterministic printed form: fully parenthesized, commutative operands of
/// + and * ordered lexicographically, constants at 12 significant digits.
std::string canonicalize(const Node& n);
inline std::string canonicalize(const Expression& e) { return canonicalize(e.root()); }

/// Re-parses the canonical form so the returned tree evaluates exactly as
/// its canonical string says.
Expression normalize(const Expression& e, const std::set<std::string>& allowed_vars);

}  // namespace evoscope::expr

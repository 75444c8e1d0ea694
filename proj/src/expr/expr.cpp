#include "evoscope/expr/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace evoscope::expr {

Node Node::constant(double v) {
    Node n;
    n.kind = NodeKind::Constant;
    n.value = v;
    return n;
}

Node Node::variable(std::string name) {
    Node n;
    n.kind = NodeKind::Variable;
    n.name = std::move(name);
    return n;
}

Node Node::negate(Node operand) {
    Node n;
    n.kind = NodeKind::Unary;
    n.children.push_back(std::move(operand));
    return n;
}

Node Node::binary(BinaryOp op, Node lhs, Node rhs) {
    Node n;
    n.kind = NodeKind::Binary;
    n.op = op;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
}

Node Node::call(Function fn, Node arg) {
    Node n;
    n.kind = NodeKind::Call;
    n.fn = fn;
    n.children.push_back(std::move(arg));
    return n;
}

std::string_view function_name(Function fn) {
    switch (fn) {
        case Function::Sin: return "sin";
        case Function::Cos: return "cos";
        case Function::Exp: return "exp";
        case Function::Log: return "log";
        case Function::Sqrt: return "sqrt";
        case Function::Abs: return "abs";
        case Function::Tanh: return "tanh";
    }
    return "?";
}

char binary_symbol(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return '+';
        case BinaryOp::Sub: return '-';
        case BinaryOp::Mul: return '*';
        case BinaryOp::Div: return '/';
        case BinaryOp::Pow: return '^';
    }
    return '?';
}

std::size_t depth(const Node& n) {
    std::size_t d = 0;
    for (const auto& c : n.children) d = std::max(d, depth(c));
    return d + 1;
}

std::size_t node_count(const Node& n) {
    std::size_t c = 1;
    for (const auto& ch : n.children) c += node_count(ch);
    return c;
}

namespace {

void collect_vars(const Node& n, std::set<std::string>& out) {
    if (n.kind == NodeKind::Variable) out.insert(n.name);
    for (const auto& c : n.children) collect_vars(c, out);
}

bool lookup_function(std::string_view name, Function& fn) {
    static constexpr Function all[] = {Function::Sin,  Function::Cos, Function::Exp, Function::Log,
                                       Function::Sqrt, Function::Abs, Function::Tanh};
    for (auto f : all) {
        if (function_name(f) == name) {
            fn = f;
            return true;
        }
    }
    return false;
}

// Recursive-descent parser over a byte buffer.
//   expr  := term (('+'|'-') term)*
//   term  := unary (('*'|'/') unary)*
//   unary := ('-'|'+') unary | power
//   power := primary (('^'|'**') unary)?
class Parser {
public:
    Parser(std::string_view text, const std::set<std::string>& vars) : text_(text), vars_(vars) {}

    Node run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        Node root = parse_expr();
        skip_ws();
        if (pos_ < text_.size()) throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
        if (node_count(root) > kMaxNodes) throw ParseError("expression exceeds node limit", 0);
        if (depth(root) > kMaxDepth) throw ParseError("expression exceeds depth limit", 0);
        return root;
    }

private:
    static constexpr std::size_t kMaxNesting = 256;

    struct NestGuard {
        Parser& p;
        explicit NestGuard(Parser& parser) : p(parser) {
            if (++p.nesting_ > kMaxNesting) throw ParseError("expression nested too deeply", p.pos_);
        }
        ~NestGuard() { --p.nesting_; }
    };

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool peek_pow() {
        skip_ws();
        if (pos_ >= text_.size()) return false;
        if (text_[pos_] == '^') return true;
        return text_[pos_] == '*' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*';
    }

    Node parse_expr() {
        NestGuard guard(*this);
        Node lhs = parse_term();
        for (;;) {
            if (peek('+')) {
                ++pos_;
                lhs = Node::binary(BinaryOp::Add, std::move(lhs), parse_term());
            } else if (peek('-')) {
                ++pos_;
                lhs = Node::binary(BinaryOp::Sub, std::move(lhs), parse_term());
            } else {
                return lhs;
            }
        }
    }

    Node parse_term() {
        Node lhs = parse_unary();
        for (;;) {
            if (peek('*')) {
                ++pos_;
                lhs = Node::binary(BinaryOp::Mul, std::move(lhs), parse_unary());
            } else if (peek('/')) {
                ++pos_;
                lhs = Node::binary(BinaryOp::Div, std::move(lhs), parse_unary());
            } else {
                return lhs;
            }
        }
    }

    Node parse_unary() {
        NestGuard guard(*this);
        if (peek('-')) {
            ++pos_;
            return Node::negate(parse_unary());
        }
        if (peek('+')) {
            ++pos_;
            return parse_unary();
        }
        return parse_power();
    }

    Node parse_power() {
        Node base = parse_primary();
        if (peek_pow()) {
            pos_ += text_[pos_] == '^' ? 1 : 2;
            return Node::binary(BinaryOp::Pow, std::move(base), parse_unary());
        }
        return base;
    }

    Node parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            const std::size_t open = pos_;
            ++pos_;
            Node inner = parse_expr();
            if (!peek(')')) throw ParseError("expected ')' to close '(' at offset " + std::to_string(open), pos_);
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
    }

    Node parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string literal(text_.substr(start, pos_ - start));
        char* end = nullptr;
        const double v = std::strtod(literal.c_str(), &end);
        if (end != literal.c_str() + literal.size() || literal == ".")
            throw ParseError("malformed number '" + literal + "'", start);
        if (!std::isfinite(v)) throw ParseError("number out of range '" + literal + "'", start);
        return Node::constant(v);
    }

    Node parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.'))
            ++pos_;
        std::string_view ident = text_.substr(start, pos_ - start);
        for (std::string_view prefix : {"np.", "numpy.", "math."}) {
            if (ident.substr(0, prefix.size()) == prefix) {
                ident.remove_prefix(prefix.size());
                break;
            }
        }
        if (peek('(')) {
            Function fn;
            if (!lookup_function(ident, fn)) throw ParseError("unknown function '" + std::string(ident) + "'", start);
            ++pos_;
            Node arg = parse_expr();
            if (!peek(')')) throw ParseError("expected ')' after function argument", pos_);
            ++pos_;
            return Node::call(fn, std::move(arg));
        }
        if (ident == "pi") return Node::constant(3.14159265358979323846);
        if (vars_.count(std::string(ident)) == 0)
            throw ParseError("unknown variable '" + std::string(ident) + "'", start);
        return Node::variable(std::string(ident));
    }

    std::string_view text_;
    const std::set<std::string>& vars_;
    std::size_t pos_ = 0;
    std::size_t nesting_ = 0;
};

std::string format_constant(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", std::fabs(v));
    if (std::signbit(v)) return std::string("(-") + buf + ")";
    return buf;
}

double apply_function(Function fn, double x) {
    switch (fn) {
        case Function::Sin: return std::sin(x);
        case Function::Cos: return std::cos(x);
        case Function::Exp: return std::exp(x);
        case Function::Log: return std::log(x);
        case Function::Sqrt: return std::sqrt(x);
        case Function::Abs: return std::fabs(x);
        case Function::Tanh: return std::tanh(x);
    }
    return std::nan("");
}

double apply_binary(BinaryOp op, double a, double b) {
    switch (op) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div: return a / b;
        case BinaryOp::Pow: return std::pow(a, b);
    }
    return std::nan("");
}

}  // namespace

std::set<std::string> variables(const Node& n) {
    std::set<std::string> out;
    collect_vars(n, out);
    return out;
}

Expression parse(std::string_view text, const std::set<std::string>& allowed_vars) {
    return Expression(Parser(text, allowed_vars).run());
}

EvalContext& EvalContext::bind(const std::string& name, double v) {
    values_[name] = std::vector<double>{v};
    return *this;
}

EvalContext& EvalContext::bind(const std::string& name, std::vector<double> v) {
    if (has_vector_ && v.size() != length_)
        throw std::invalid_argument("vector binding '" + name + "' has length " + std::to_string(v.size()) +
                                    ", expected " + std::to_string(length_));
    length_ = v.size();
    has_vector_ = true;
    values_[name] = std::move(v);
    return *this;
}

const std::vector<double>& EvalContext::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw UnboundVariable(name);
    return it->second;
}

std::vector<double> evaluate(const Node& n, const EvalContext& ctx) {
    const std::size_t len = ctx.length();
    switch (n.kind) {
        case NodeKind::Constant: return std::vector<double>(len, n.value);
        case NodeKind::Variable: {
            const auto& v = ctx.get(n.name);
            if (v.size() == len) return v;
            return std::vector<double>(len, v.empty() ? std::nan("") : v.front());
        }
        case NodeKind::Unary: {
            auto v = evaluate(n.children[0], ctx);
            for (auto& x : v) x = -x;
            return v;
        }
        case NodeKind::Binary: {
            auto a = evaluate(n.children[0], ctx);
            const auto b = evaluate(n.children[1], ctx);
            for (std::size_t i = 0; i < len; ++i) a[i] = apply_binary(n.op, a[i], b[i]);
            return a;
        }
        case NodeKind::Call: {
            auto v = evaluate(n.children[0], ctx);
            for (auto& x : v) x = apply_function(n.fn, x);
            return v;
        }
    }
    return std::vector<double>(len, std::nan(""));
}

std::vector<double> evaluate(const Expression& e, const EvalContext& ctx) { return evaluate(e.root(), ctx); }

std::string canonicalize(const Node& n) {
    switch (n.kind) {
        case NodeKind::Constant: return format_constant(n.value);
        case NodeKind::Variable: return n.name;
        case NodeKind::Unary: return "(-" + canonicalize(n.children[0]) + ")";
        case NodeKind::Call: return std::string(function_name(n.fn)) + "(" + canonicalize(n.children[0]) + ")";
        case NodeKind::Binary: {
            std::string a = canonicalize(n.children[0]);
            std::string b = canonicalize(n.children[1]);
            if ((n.op == BinaryOp::Add || n.op == BinaryOp::Mul) && b < a) std::swap(a, b);
            return "(" + a + binary_symbol(n.op) + b + ")";
        }
    }
    return {};
}

Expression normalize(const Expression& e, const std::set<std::string>& allowed_vars) {
    return parse(canonicalize(e), allowed_vars);
}

}  // namespace evoscope::expr

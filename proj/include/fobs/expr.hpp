#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include <Eigen/Dense>

namespace fobs::expr {

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

class UnknownNameError : public ParseError {
  public:
    UnknownNameError(const std::string& name, std::size_t offset)
        : ParseError("unknown identifier '" + name + "'", offset), name_(name) {}

    const std::string& name() const { return name_; }

  private:
    std::string name_;
};

class UnboundNameError : public std::runtime_error {
  public:
    explicit UnboundNameError(const std::string& name)
        : std::runtime_error("no value bound for parameter '" + name + "'"), name_(name) {}

    const std::string& name() const { return name_; }

  private:
    std::string name_;
};

// Arithmetic over numeric literals, state variables x1..xn, named
// parameters, binary + - * / ^, unary minus and exp(). Precedence from
// loosest to tightest: + -, * /, unary -, ^ (right-associative), so
// "-x1^2" is -(x1^2) and "2^3^2" is 2^(3^2).
class Expr {
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    struct Number { double value; };
    struct Variable { int index; };  // 1-based
    struct Parameter { std::string name; };
    struct Negate { NodePtr child; };
    struct Binary { char op; NodePtr lhs, rhs; };
    struct ExpCall { NodePtr arg; };

    struct Node {
        std::variant<Number, Variable, Parameter, Negate, Binary, ExpCall> v;
    };

  public:
    Expr() = default;

    static Expr number(double v) { return Expr(make(Number{v})); }
    static Expr variable(int index) { return Expr(make(Variable{index})); }
    static Expr parameter(std::string name) { return Expr(make(Parameter{std::move(name)})); }
    static Expr negate(Expr e) { return Expr(make(Negate{e.node_})); }
    static Expr binary(char op, Expr lhs, Expr rhs) {
        return Expr(make(Binary{op, lhs.node_, rhs.node_}));
    }
    static Expr exp(Expr arg) { return Expr(make(ExpCall{arg.node_})); }

    bool valid() const { return node_ != nullptr; }

    /// IEEE double evaluation in tree order; non-finite results propagate.
    double eval(const Eigen::VectorXd& x, const std::map<std::string, double>& params) const {
        return eval_node(*node_, x, params);
    }

    /// Precedence-aware rendering; reparsing the result reproduces the tree.
    std::string str() const { return print_node(*node_, 0); }

    bool same_structure(const Expr& other) const { return equal_nodes(*node_, *other.node_); }

    friend Expr parse(std::string_view, int, const std::set<std::string>&);

  private:
    explicit Expr(NodePtr node) : node_(std::move(node)) {}

    template <class T>
    static NodePtr make(T&& v) {
        return std::make_shared<const Node>(Node{std::forward<T>(v)});
    }

    static double eval_node(const Node& node, const Eigen::VectorXd& x,
                            const std::map<std::string, double>& params) {
        return std::visit(
            [&](const auto& n) -> double {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Number>) {
                    return n.value;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    if (n.index < 1 || n.index > x.size())
                        throw std::out_of_range("Expr::eval: variable x" + std::to_string(n.index) +
                                                " outside the supplied state");
                    return x[n.index - 1];
                } else if constexpr (std::is_same_v<T, Parameter>) {
                    auto it = params.find(n.name);
                    if (it == params.end()) throw UnboundNameError(n.name);
                    return it->second;
                } else if constexpr (std::is_same_v<T, Negate>) {
                    return -eval_node(*n.child, x, params);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    const double a = eval_node(*n.lhs, x, params);
                    const double b = eval_node(*n.rhs, x, params);
                    switch (n.op) {
                        case '+': return a + b;
                        case '-': return a - b;
                        case '*': return a * b;
                        case '/': return a / b;
                        default: return std::pow(a, b);
                    }
                } else {
                    return std::exp(eval_node(*n.arg, x, params));
                }
            },
            node.v);
    }

    // precedence levels used by the printer; primaries are 5
    static int precedence(const Node& node) {
        return std::visit(
            [](const auto& n) -> int {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Binary>) {
                    switch (n.op) {
                        case '+':
                        case '-': return 1;
                        case '*':
                        case '/': return 2;
                        default: return 4;
                    }
                } else if constexpr (std::is_same_v<T, Negate>) {
                    return 3;
                } else {
                    return 5;
                }
            },
            node.v);
    }

    static std::string wrap(const Node& child, int min_prec) {
        const std::string s = print_node(child, 0);
        if (precedence(child) < min_prec) return "(" + s + ")";
        return s;
    }

    static std::string print_node(const Node& node, int) {
        return std::visit(
            [&](const auto& n) -> std::string {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Number>) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.17g", n.value);
                    return buf;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    return "x" + std::to_string(n.index);
                } else if constexpr (std::is_same_v<T, Parameter>) {
                    return n.name;
                } else if constexpr (std::is_same_v<T, Negate>) {
                    return "-" + wrap(*n.child, 3);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    if (n.op == '^') {
                        // base must be a primary; exponent may be signed or another power
                        return wrap(*n.lhs, 5) + "^" + wrap(*n.rhs, 3);
                    }
                    const int prec = n.op == '+' || n.op == '-' ? 1 : 2;
                    // left-assoc: the right child needs parens at equal precedence
                    return wrap(*n.lhs, prec) + " " + n.op + " " + wrap(*n.rhs, prec + 1);
                } else {
                    return "exp(" + print_node(*n.arg, 0) + ")";
                }
            },
            node.v);
    }

    static bool equal_nodes(const Node& a, const Node& b) {
        if (a.v.index() != b.v.index()) return false;
        return std::visit(
            [&](const auto& na) -> bool {
                using T = std::decay_t<decltype(na)>;
                const auto& nb = std::get<T>(b.v);
                if constexpr (std::is_same_v<T, Number>) {
                    return na.value == nb.value;
                } else if constexpr (std::is_same_v<T, Variable>) {
                    return na.index == nb.index;
                } else if constexpr (std::is_same_v<T, Parameter>) {
                    return na.name == nb.name;
                } else if constexpr (std::is_same_v<T, Negate>) {
                    return equal_nodes(*na.child, *nb.child);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return na.op == nb.op && equal_nodes(*na.lhs, *nb.lhs) &&
                           equal_nodes(*na.rhs, *nb.rhs);
                } else {
                    return equal_nodes(*na.arg, *nb.arg);
                }
            },
            a.v);
    }

    NodePtr node_;
};

namespace detail {

class Parser {
  public:
    Parser(std::string_view text, int n_vars, const std::set<std::string>& params)
        : text_(text), n_(n_vars), params_(params) {}

    Expr run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        Expr e = parse_sum();
        skip_ws();
        if (pos_ < text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

  private:
    // sum := product { ('+'|'-') product }
    Expr parse_sum() {
        Expr lhs = parse_product();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
                const char op = text_[pos_++];
                lhs = Expr::binary(op, std::move(lhs), parse_product());
            } else {
                return lhs;
            }
        }
    }

    // product := signed { ('*'|'/') signed }
    Expr parse_product() {
        Expr lhs = parse_signed();
        while (true) {
            skip_ws();
            if (pos_ < text_.size() && (text_[pos_] == '*' || text_[pos_] == '/')) {
                const char op = text_[pos_++];
                lhs = Expr::binary(op, std::move(lhs), parse_signed());
            } else {
                return lhs;
            }
        }
    }

    // signed := '-' signed | power
    Expr parse_signed() {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '-') {
            ++pos_;
            return Expr::negate(parse_signed());
        }
        return parse_power();
    }

    // power := primary [ '^' signed ]   (right-associative)
    Expr parse_power() {
        Expr base = parse_primary();
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '^') {
            ++pos_;
            return Expr::binary('^', std::move(base), parse_signed());
        }
        return base;
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("expected operand", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = parse_sum();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')')
                throw ParseError("missing ')'", pos_);
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t probe = pos_ + 1;
            if (probe < text_.size() && (text_[probe] == '+' || text_[probe] == '-')) ++probe;
            if (probe < text_.size() && std::isdigit(static_cast<unsigned char>(text_[probe]))) {
                pos_ = probe;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            }
        }
        double value = 0.0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc{} || res.ptr != text_.data() + pos_)
            throw ParseError("malformed number", start);
        return Expr::number(value);
    }

    Expr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '_'))
            ++pos_;
        const std::string name(text_.substr(start, pos_ - start));

        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '(') {
            if (name != "exp")
                throw UnknownNameError(name, start);
            ++pos_;
            Expr arg = parse_sum();
            skip_ws();
            if (pos_ >= text_.size() || text_[pos_] != ')')
                throw ParseError("missing ')'", pos_);
            ++pos_;
            return Expr::exp(std::move(arg));
        }

        // x followed by digits is a state variable
        if (name.size() > 1 && name[0] == 'x' &&
            name.find_first_not_of("0123456789", 1) == std::string::npos) {
            const int index = std::stoi(name.substr(1));
            if (index < 1 || index > n_)
                throw UnknownNameError(name, start);
            return Expr::variable(index);
        }
        if (params_.count(name)) return Expr::parameter(name);
        throw UnknownNameError(name, start);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int n_;
    const std::set<std::string>& params_;
};

}  // namespace detail

/// Parse against a state dimension and a set of declared parameter names.
inline Expr parse(std::string_view text, int n_vars, const std::set<std::string>& params = {}) {
    return detail::Parser(text, n_vars, params).run();
}

}  // namespace fobs::expr

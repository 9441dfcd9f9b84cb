#include "figp/expression.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include "figp/csv.hpp"

namespace figp {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

Expression Expression::number(double value) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Number;
    n->value = value;
    return Expression(std::move(n));
}

Expression Expression::variable(int index) {
    if (index < 1) throw std::invalid_argument("variable index must be >= 1");
    auto n = std::make_shared<Node>();
    n->kind = Kind::Variable;
    n->var = index;
    return Expression(std::move(n));
}

Expression Expression::negate(Expression operand) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Negate;
    n->lhs = std::make_shared<const Expression>(std::move(operand));
    return Expression(std::move(n));
}

Expression Expression::binary(Kind op, Expression lhs, Expression rhs) {
    if (op != Kind::Add && op != Kind::Sub && op != Kind::Mul && op != Kind::Div && op != Kind::Pow) {
        throw std::invalid_argument("not a binary operator");
    }
    auto n = std::make_shared<Node>();
    n->kind = op;
    n->lhs = std::make_shared<const Expression>(std::move(lhs));
    n->rhs = std::make_shared<const Expression>(std::move(rhs));
    return Expression(std::move(n));
}

Expression Expression::call(Function fn, Expression arg) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Call;
    n->fn = fn;
    n->lhs = std::make_shared<const Expression>(std::move(arg));
    return Expression(std::move(n));
}

int Expression::max_variable() const {
    switch (kind()) {
        case Kind::Number: return 0;
        case Kind::Variable: return var_index();
        case Kind::Negate:
        case Kind::Call: return operand().max_variable();
        default: return std::max(lhs().max_variable(), rhs().max_variable());
    }
}

double Expression::evaluate(std::span<const double> x) const {
    switch (kind()) {
        case Kind::Number: return value();
        case Kind::Variable: {
            const auto k = static_cast<std::size_t>(var_index());
            if (k > x.size()) throw Error("undefined variable x" + std::to_string(k));
            return x[k - 1];
        }
        case Kind::Negate: return -operand().evaluate(x);
        case Kind::Add: return lhs().evaluate(x) + rhs().evaluate(x);
        case Kind::Sub: return lhs().evaluate(x) - rhs().evaluate(x);
        case Kind::Mul: return lhs().evaluate(x) * rhs().evaluate(x);
        case Kind::Div: return lhs().evaluate(x) / rhs().evaluate(x);
        case Kind::Pow: return std::pow(lhs().evaluate(x), rhs().evaluate(x));
        case Kind::Call: {
            const double a = operand().evaluate(x);
            switch (function()) {
                case Function::Sin: return std::sin(a);
                case Function::Cos: return std::cos(a);
                case Function::Exp: return std::exp(a);
                case Function::Sqrt: return std::sqrt(a);
                case Function::Abs: return std::abs(a);
            }
        }
    }
    return 0.0;
}

bool operator==(const Expression& a, const Expression& b) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
        case Expression::Kind::Number: return a.value() == b.value();
        case Expression::Kind::Variable: return a.var_index() == b.var_index();
        case Expression::Kind::Negate: return a.operand() == b.operand();
        case Expression::Kind::Call: return a.function() == b.function() && a.operand() == b.operand();
        default: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    }
}

std::string to_string(Expression::Function fn) {
    switch (fn) {
        case Expression::Function::Sin: return "sin";
        case Expression::Function::Cos: return "cos";
        case Expression::Function::Exp: return "exp";
        case Expression::Function::Sqrt: return "sqrt";
        case Expression::Function::Abs: return "abs";
    }
    return "?";
}

namespace {

// Binding strength used by the printer. Atoms (numbers, variables, calls) bind tightest.
int precedence(Expression::Kind k) {
    switch (k) {
        case Expression::Kind::Add:
        case Expression::Kind::Sub: return 1;
        case Expression::Kind::Mul:
        case Expression::Kind::Div: return 2;
        case Expression::Kind::Negate: return 3;
        case Expression::Kind::Pow: return 4;
        default: return 5;
    }
}

char op_char(Expression::Kind k) {
    switch (k) {
        case Expression::Kind::Add: return '+';
        case Expression::Kind::Sub: return '-';
        case Expression::Kind::Mul: return '*';
        case Expression::Kind::Div: return '/';
        default: return '^';
    }
}

void print(const Expression& e, std::string& out);

void print_child(const Expression& e, bool parens, std::string& out) {
    if (parens) out += '(';
    print(e, out);
    if (parens) out += ')';
}

void print(const Expression& e, std::string& out) {
    using K = Expression::Kind;
    switch (e.kind()) {
        case K::Number: out += format_number(e.value()); return;
        case K::Variable: out += "x" + std::to_string(e.var_index()); return;
        case K::Call:
            out += to_string(e.function());
            out += '(';
            print(e.operand(), out);
            out += ')';
            return;
        case K::Negate:
            out += '-';
            print_child(e.operand(), precedence(e.operand().kind()) < 3, out);
            return;
        case K::Pow:
            // The base is a primary; the exponent is a unary expression.
            print_child(e.lhs(), precedence(e.lhs().kind()) <= 4, out);
            out += '^';
            print_child(e.rhs(), precedence(e.rhs().kind()) < 3, out);
            return;
        default: {
            const int p = precedence(e.kind());
            print_child(e.lhs(), precedence(e.lhs().kind()) < p, out);
            out += op_char(e.kind());
            print_child(e.rhs(), precedence(e.rhs().kind()) <= p, out);
            return;
        }
    }
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expression parse() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        Expression e = parse_sum();
        skip_ws();
        if (pos_ < text_.size()) {
            if (text_[pos_] == ')') throw ParseError("unbalanced ')'", pos_);
            throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
        }
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expression parse_sum() {
        Expression lhs = parse_product();
        for (;;) {
            if (accept('+')) {
                lhs = Expression::binary(Expression::Kind::Add, std::move(lhs), parse_product());
            } else if (accept('-')) {
                lhs = Expression::binary(Expression::Kind::Sub, std::move(lhs), parse_product());
            } else {
                return lhs;
            }
        }
    }

    Expression parse_product() {
        Expression lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = Expression::binary(Expression::Kind::Mul, std::move(lhs), parse_unary());
            } else if (accept('/')) {
                lhs = Expression::binary(Expression::Kind::Div, std::move(lhs), parse_unary());
            } else {
                return lhs;
            }
        }
    }

    Expression parse_unary() {
        if (accept('-')) return Expression::negate(parse_unary());
        return parse_power();
    }

    Expression parse_power() {
        Expression base = parse_primary();
        if (accept('^')) return Expression::binary(Expression::Kind::Pow, std::move(base), parse_unary());
        return base;
    }

    Expression parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            const std::size_t open = pos_;
            ++pos_;
            Expression inner = parse_sum();
            if (!accept(')')) throw ParseError("unbalanced '(' opened", open);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    Expression parse_number() {
        const std::size_t start = pos_;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
        if (ec != std::errc() || !std::isfinite(v)) throw ParseError("malformed number", start);
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return Expression::number(v);
    }

    Expression parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);

        if (name.size() >= 2 && name[0] == 'x') {
            int index = 0;
            auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
            if (ec == std::errc() && ptr == name.data() + name.size() && index >= 1) return Expression::variable(index);
        }

        static constexpr std::array<std::pair<std::string_view, Expression::Function>, 5> functions{{
            {"sin", Expression::Function::Sin},
            {"cos", Expression::Function::Cos},
            {"exp", Expression::Function::Exp},
            {"sqrt", Expression::Function::Sqrt},
            {"abs", Expression::Function::Abs},
        }};
        for (const auto& [fname, fn] : functions) {
            if (name == fname) {
                skip_ws();
                const std::size_t open = pos_;
                if (!accept('(')) throw ParseError("expected '(' after " + std::string(name), pos_);
                Expression arg = parse_sum();
                if (!accept(')')) throw ParseError("unbalanced '(' opened", open);
                return Expression::call(fn, std::move(arg));
            }
        }
        throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string Expression::to_string() const {
    std::string out;
    print(*this, out);
    return out;
}

Expression parse_expression(std::string_view text) { return Parser(text).parse(); }

FunctionalInput sample_expression(const Expression& expr, const GridPtr& grid, std::string label) {
    const int maxvar = expr.max_variable();
    if (static_cast<std::size_t>(maxvar) > grid->dim()) {
        throw Error("undefined variable x" + std::to_string(maxvar) + " for a " + std::to_string(grid->dim()) +
                    "-dimensional domain");
    }
    if (label.empty()) label = expr.to_string();
    return sample_function([&expr](std::span<const double> x) { return expr.evaluate(x); }, grid, std::move(label));
}

}  // namespace figp

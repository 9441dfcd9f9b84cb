#ifndef FIGP_EXPRESSION_HPP
#define FIGP_EXPRESSION_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "figp/domain.hpp"

namespace figp {

/// Raised by parse_expression; offset is the byte position of the problem.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset);
    [[nodiscard]] std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Expression tree over literals, variables x1..xd, + - * / ^, unary minus and
/// the functions sin, cos, exp, sqrt, abs.
///
/// Precedence, tightest first: ^ (right associative), unary -, * /, + -.
/// So "-x1^2" is -(x1^2) and "2^-1" is 2^(-1).
class Expression {
public:
    enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
    enum class Function { Sin, Cos, Exp, Sqrt, Abs };

    static Expression number(double value);
    static Expression variable(int index);  // 1-based: x1 has index 1
    static Expression negate(Expression operand);
    static Expression binary(Kind op, Expression lhs, Expression rhs);
    static Expression call(Function fn, Expression arg);

    [[nodiscard]] Kind kind() const { return node_->kind; }
    [[nodiscard]] double value() const { return node_->value; }
    [[nodiscard]] int var_index() const { return node_->var; }
    [[nodiscard]] Function function() const { return node_->fn; }
    [[nodiscard]] const Expression& lhs() const { return *node_->lhs; }
    [[nodiscard]] const Expression& rhs() const { return *node_->rhs; }
    /// Operand of Negate and Call.
    [[nodiscard]] const Expression& operand() const { return *node_->lhs; }

    /// Largest variable index referenced; 0 for a constant expression.
    [[nodiscard]] int max_variable() const;

    /// Evaluates at point x; x[k-1] is the value of variable xk.
    [[nodiscard]] double evaluate(std::span<const double> x) const;

    /// Canonical text with minimal parentheses; parse_expression(to_string()) == *this.
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Expression& a, const Expression& b);

private:
    struct Node {
        Kind kind = Kind::Number;
        double value = 0.0;
        int var = 0;
        Function fn = Function::Sin;
        std::shared_ptr<const Expression> lhs;
        std::shared_ptr<const Expression> rhs;
    };

    explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const Node> node_;
};

Expression parse_expression(std::string_view text);

std::string to_string(Expression::Function fn);

/// Samples an expression on a grid. The expression may only reference x1..xd for the
/// grid's dimension d.
FunctionalInput sample_expression(const Expression& expr, const GridPtr& grid, std::string label = {});

}  // namespace figp

#endif  // FIGP_EXPRESSION_HPP

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpk {

/// Parse failure with a 0-based source offset.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int position)
        : std::runtime_error(what + " (at position " + std::to_string(position) + ")"),
          position_(position) {}
    int position() const { return position_; }
private:
    int position_;
};

/// Evaluation failure (NaN/Inf, log of a nonpositive number, ...) carrying the
/// offset of the offending subexpression.
class ExprEvalError : public std::runtime_error {
public:
    ExprEvalError(const std::string& what, int position)
        : std::runtime_error(what + " (at position " + std::to_string(position) + ")"),
          position_(position) {}
    int position() const { return position_; }
private:
    int position_;
};

/* Grammar (^ right-associative, unary minus between * and ^):
 *   expression := term (('+'|'-') term)*
 *   term       := unary (('*'|'/') unary)*
 *   unary      := '-' unary | power
 *   power      := primary ('^' unary)?
 *   primary    := number | 't' | 'x<i>' | call | '(' expression ')'
 *   call       := name '(' expression (',' expression)* ')'
 * Functions: exp, ln, abs, sqrt, pow, min, max and the point norms
 * norm(x), norm1(x), norm2(x) (norm1/norm2 use the declared d1/d2 split).
 */
class Expression {
public:
    struct Node {
        enum class Kind { Number, Coord, Time, Point, Unary, Binary, Call };
        Kind kind = Kind::Number;
        double number = 0;
        int coordIndex = 0;
        char op = 0;
        std::string func;
        std::vector<Node> args;
        int pos = 0;
    };

    /// Parse against a spatial dimension; d1 >= 1 declares the split used by
    /// norm1/norm2 (pass 0 when no split is declared).
    static Expression parse(const std::string& src, int dimension, int d1 = 0);

    double evaluate(const Eigen::VectorXd& x, double t) const;
    std::string print() const;
    bool timeDependent() const;
    int dimension() const { return dimension_; }

    bool operator==(const Expression& other) const;

private:
    Node root_;
    int dimension_ = 1;
    int splitD1_ = 0;
};

} // namespace fpk

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hypolab {

/// Small arithmetic expressions over grid coordinates, used for user-defined
/// coefficient fields and boundary/source data in config files.
///
/// Grammar (EBNF):
///   expr    := term  (('+'|'-') term)*
///   term    := unary (('*'|'/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          right-associative, sugar for pow
///   primary := number | var | call | '(' expr ')'
///   var     := 'x1' .. 'xN'
///   call    := ('exp'|'sin'|'cos'|'abs') '(' expr ')'
///            | ('pow'|'min'|'max') '(' expr ',' expr ')'
///
/// Division by zero and overflow follow IEEE semantics, so exp(-1/(x1*x1))
/// evaluates to exactly 0 at x1 = 0.
class Expr {
public:
    static Expr parse(const std::string& text, int dim);

    double eval(std::span<const double> x) const;
    const std::string& text() const { return text_; }
    int dim() const { return dim_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
    int dim_ = 0;
};

}  // namespace hypolab

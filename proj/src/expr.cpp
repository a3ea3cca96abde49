#include "hypolab/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "hypolab/errors.hpp"

namespace hypolab {

namespace {

enum class Op {
    Const,
    Var,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Sin,
    Cos,
    Abs,
    Pow,
    Min,
    Max,
};

}  // namespace

struct Expr::Node {
    Op op;
    double value = 0.0;  // Const
    int var = 0;         // Var
    std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

class Parser {
public:
    Parser(const std::string& text, int dim) : text_(text), dim_(dim) {}

    NodePtr run() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != text_.size())
            fail("trailing characters at position " + std::to_string(pos_));
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("expression '" + text_ + "': " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    static NodePtr make(Op op, NodePtr l = nullptr, NodePtr r = nullptr) {
        auto n = std::make_shared<Expr::Node>();
        n->op = op;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    NodePtr expr() {
        NodePtr e = term();
        while (true) {
            if (consume('+'))
                e = make(Op::Add, e, term());
            else if (consume('-'))
                e = make(Op::Sub, e, term());
            else
                return e;
        }
    }

    NodePtr term() {
        NodePtr e = unary();
        while (true) {
            if (consume('*'))
                e = make(Op::Mul, e, unary());
            else if (consume('/'))
                e = make(Op::Div, e, unary());
            else
                return e;
        }
    }

    NodePtr unary() {
        if (consume('-')) return make(Op::Neg, unary());
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (consume('^')) return make(Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return ident();
        if (consume('(')) {
            NodePtr e = expr();
            if (!consume(')')) fail("expected ')'");
            return e;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr number() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
            ++pos_;
        try {
            auto n = std::make_shared<Expr::Node>();
            n->op = Op::Const;
            n->value = std::stod(text_.substr(start, pos_ - start));
            return n;
        } catch (const std::exception&) {
            fail("bad number at position " + std::to_string(start));
        }
    }

    NodePtr ident() {
        size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (name.size() >= 2 && name[0] == 'x') {
            bool digits = true;
            for (size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                int k = std::stoi(name.substr(1));
                if (k < 1 || k > dim_)
                    fail("variable " + name + " out of range for dimension " +
                         std::to_string(dim_));
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::Var;
                n->var = k - 1;
                return n;
            }
        }
        auto unary_fn = [&](Op op) {
            if (!consume('(')) fail("expected '(' after " + name);
            NodePtr a = expr();
            if (!consume(')')) fail("expected ')'");
            return make(op, a);
        };
        auto binary_fn = [&](Op op) {
            if (!consume('(')) fail("expected '(' after " + name);
            NodePtr a = expr();
            if (!consume(',')) fail("expected ',' in " + name);
            NodePtr b = expr();
            if (!consume(')')) fail("expected ')'");
            return make(op, a, b);
        };
        if (name == "exp") return unary_fn(Op::Exp);
        if (name == "sin") return unary_fn(Op::Sin);
        if (name == "cos") return unary_fn(Op::Cos);
        if (name == "abs") return unary_fn(Op::Abs);
        if (name == "pow") return binary_fn(Op::Pow);
        if (name == "min") return binary_fn(Op::Min);
        if (name == "max") return binary_fn(Op::Max);
        fail("unknown identifier '" + name + "'");
    }

    const std::string& text_;
    int dim_;
    size_t pos_ = 0;
};

double eval_node(const Expr::Node& n, std::span<const double> x) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return x[static_cast<size_t>(n.var)];
        case Op::Add: return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
        case Op::Sub: return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
        case Op::Mul: return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
        case Op::Div: return eval_node(*n.lhs, x) / eval_node(*n.rhs, x);
        case Op::Neg: return -eval_node(*n.lhs, x);
        case Op::Exp: return std::exp(eval_node(*n.lhs, x));
        case Op::Sin: return std::sin(eval_node(*n.lhs, x));
        case Op::Cos: return std::cos(eval_node(*n.lhs, x));
        case Op::Abs: return std::abs(eval_node(*n.lhs, x));
        case Op::Pow: return std::pow(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
        case Op::Min: return std::min(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
        case Op::Max: return std::max(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
    }
    return 0.0;
}

}  // namespace

Expr Expr::parse(const std::string& text, int dim) {
    Expr e;
    e.root_ = Parser(text, dim).run();
    e.text_ = text;
    e.dim_ = dim;
    return e;
}

double Expr::eval(std::span<const double> x) const {
    return eval_node(*root_, x);
}

}  // namespace hypolab

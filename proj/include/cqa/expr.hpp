#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cqa/errors.hpp"

namespace cqa::expr {

enum class NodeKind { Constant, Variable, Param, Neg, Add, Sub, Mul, Div, Pow, Call };

enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind;
    double value = 0.0;       // Constant
    int var = 0;              // Variable, 1-based
    std::string name;         // Param
    Func func = Func::Sin;    // Call
    NodePtr lhs, rhs;         // rhs empty for Neg/Call
    std::size_t offset = static_cast<std::size_t>(-1);  // byte offset in source
    bool has_variable = false;  // subtree references some x_k
};

// Values for parameter symbols (the index symbol and family coefficients).
using Bindings = std::map<std::string, double>;

class Expression {
public:
    Expression() = default;
    Expression(NodePtr root, int num_vars, std::set<std::string> params)
        : root_(std::move(root)), num_vars_(num_vars), params_(std::move(params)) {}

    const NodePtr& root() const { return root_; }
    int num_vars() const { return num_vars_; }
    const std::set<std::string>& params() const { return params_; }
    bool has_params() const { return !params_.empty(); }
    bool empty() const { return root_ == nullptr; }

private:
    NodePtr root_;
    int num_vars_ = 0;
    std::set<std::string> params_;  // parameter names referenced by the tree
};

struct ParseOptions {
    int num_vars = 0;                  // accepts x1..x<num_vars>
    std::vector<std::string> params;   // additional symbols (index, coefficients)
};

// Recursive-descent parse of the expression grammar. Throws ParseError with a
// byte offset on malformed input or unknown identifiers.
Expression parse(std::string_view source, const ParseOptions& opts);

// Deterministic printer; parse(to_string(e)) reproduces the tree of any
// parse-built expression and is value-equivalent for constructed trees.
std::string to_string(const Expression& e);

// Structural tree equality (kinds, operators, variables, constants bit-equal).
bool structurally_equal(const Expression& a, const Expression& b);

// Evaluate at x with all referenced parameters bound. Throws DomainError on
// domain violations, ValidationError when a parameter is unbound or x is too
// short.
double evaluate(const Expression& e, const Eigen::VectorXd& x, const Bindings& bindings = {});

// Convenience overload: `index` must be supplied iff the expression references
// exactly one parameter symbol (the index), and is bound to it.
double evaluate(const Expression& e, const Eigen::VectorXd& x, std::optional<long> index);

// Forward-mode gradient w.r.t. x1..xn (n = e.num_vars(), one dual pass per
// variable). Parameters are held constant. Throws DomainError at
// non-differentiable points (abs at 0, sqrt at 0 with varying argument...).
Eigen::VectorXd gradient(const Expression& e, const Eigen::VectorXd& x,
                         const Bindings& bindings = {});

// Replace bound parameters by constants; the result references only the
// remaining parameters. Binding values must be finite.
Expression substitute(const Expression& e, const Bindings& bindings);

// Tree builders for programmatic construction.
Expression constant(double v);
Expression variable(int k, int num_vars);
Expression add(const Expression& a, const Expression& b);
Expression sub(const Expression& a, const Expression& b);
Expression mul(const Expression& a, const Expression& b);
Expression divide(const Expression& a, const Expression& b);
Expression power(const Expression& a, const Expression& b);
Expression negate(const Expression& a);
Expression call(Func f, const Expression& a);

}  // namespace cqa::expr

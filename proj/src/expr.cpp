#include "cqa/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

namespace cqa::expr {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

NodePtr make_node(Node n) {
    n.has_variable = (n.kind == NodeKind::Variable) ||
                     (n.lhs && n.lhs->has_variable) ||
                     (n.rhs && n.rhs->has_variable);
    return std::make_shared<const Node>(std::move(n));
}

const std::map<std::string, Func, std::less<>> kFuncs = {
    {"sin", Func::Sin}, {"cos", Func::Cos}, {"exp", Func::Exp},
    {"log", Func::Log}, {"sqrt", Func::Sqrt}, {"abs", Func::Abs},
};

const char* func_name(Func f) {
    switch (f) {
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sqrt: return "sqrt";
        case Func::Abs: return "abs";
    }
    return "?";
}

bool integral_value(double v) {
    return std::isfinite(v) && std::nearbyint(v) == v && std::fabs(v) < 9.007199254740992e15;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    Parser(std::string_view src, const ParseOptions& opts) : src_(src), opts_(opts) {
        for (const auto& p : opts.params) {
            if (looks_like_variable(p))
                throw ValidationError("parameter name '" + p + "' collides with a variable name");
        }
    }

    Expression run() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", 0);
        NodePtr root = parse_expr();
        skip_ws();
        if (pos_ < src_.size())
            throw ParseError(std::string("unexpected character '") + src_[pos_] + "'", pos_);
        return Expression(std::move(root), opts_.num_vars, std::move(used_params_));
    }

private:
    std::string_view src_;
    const ParseOptions& opts_;
    std::size_t pos_ = 0;
    std::set<std::string> used_params_;

    bool looks_like_variable(const std::string& name) const {
        if (name.size() < 2 || name[0] != 'x') return false;
        for (std::size_t i = 1; i < name.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
        long k = std::strtol(name.c_str() + 1, nullptr, 10);
        return k >= 1 && k <= opts_.num_vars;
    }

    void skip_ws() {
        while (pos_ < src_.size() &&
               (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    bool accept(char c) {
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            std::size_t off = pos_;
            if (accept('+')) {
                lhs = make_node({.kind = NodeKind::Add, .lhs = lhs, .rhs = parse_term(), .offset = off});
            } else if (accept('-')) {
                lhs = make_node({.kind = NodeKind::Sub, .lhs = lhs, .rhs = parse_term(), .offset = off});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        for (;;) {
            std::size_t off = pos_;
            if (accept('*')) {
                lhs = make_node({.kind = NodeKind::Mul, .lhs = lhs, .rhs = parse_factor(), .offset = off});
            } else if (accept('/')) {
                lhs = make_node({.kind = NodeKind::Div, .lhs = lhs, .rhs = parse_factor(), .offset = off});
            } else {
                return lhs;
            }
        }
    }

    // '^' binds tighter than unary minus and associates to the right.
    NodePtr parse_factor() {
        std::size_t off = pos_;
        if (accept('-'))
            return make_node({.kind = NodeKind::Neg, .lhs = parse_factor(), .offset = off});
        NodePtr base = parse_atom();
        off = pos_;
        if (accept('^'))
            return make_node({.kind = NodeKind::Pow, .lhs = base, .rhs = parse_factor(), .offset = off});
        return base;
    }

    NodePtr parse_atom() {
        char c = peek();
        std::size_t off = pos_;
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        if (c == '\0') throw ParseError("unexpected end of expression", pos_);
        throw ParseError(std::string("unexpected character '") + c + "'", off);
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                pos_ = mark;  // 'e' belongs to something else; stop the number here
            } else {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        double v = 0;
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (res.ec != std::errc{} || res.ptr != src_.data() + pos_)
            throw ParseError("malformed number", start);
        return make_node({.kind = NodeKind::Constant, .value = v, .offset = start});
    }

    NodePtr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name(src_.substr(start, pos_ - start));
        if (peek() == '(') {
            auto it = kFuncs.find(name);
            if (it == kFuncs.end()) throw ParseError("unknown function '" + name + "'", start);
            ++pos_;
            NodePtr arg = parse_expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return make_node({.kind = NodeKind::Call, .func = it->second, .lhs = arg, .offset = start});
        }
        if (name.size() > 1 && name[0] == 'x') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
            if (digits) {
                long k = std::strtol(name.c_str() + 1, nullptr, 10);
                if (k >= 1 && k <= opts_.num_vars)
                    return make_node({.kind = NodeKind::Variable, .var = static_cast<int>(k), .offset = start});
                throw ParseError("variable '" + name + "' out of range (system has " +
                                     std::to_string(opts_.num_vars) + " variables)",
                                 start);
            }
        }
        for (const auto& p : opts_.params) {
            if (p == name) {
                used_params_.insert(name);
                return make_node({.kind = NodeKind::Param, .name = name, .offset = start});
            }
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }
};

// ---------------------------------------------------------------------------
// Printer

int prec(const Node& n) {
    switch (n.kind) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        case NodeKind::Constant: return n.value < 0 ? 3 : 5;
        default: return 5;
    }
}

std::string fmt_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void print_node(const NodePtr& n, std::string& out);

void print_child(const NodePtr& c, bool parens, std::string& out) {
    if (parens) out.push_back('(');
    print_node(c, out);
    if (parens) out.push_back(')');
}

void print_node(const NodePtr& n, std::string& out) {
    const int p = prec(*n);
    switch (n->kind) {
        case NodeKind::Constant:
            if (!std::isfinite(n->value)) throw ValidationError("cannot print non-finite constant");
            out += fmt_double(n->value);
            break;
        case NodeKind::Variable:
            out += "x" + std::to_string(n->var);
            break;
        case NodeKind::Param:
            out += n->name;
            break;
        case NodeKind::Neg:
            out.push_back('-');
            print_child(n->lhs, prec(*n->lhs) < p, out);
            break;
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Div: {
            char op = n->kind == NodeKind::Add   ? '+'
                      : n->kind == NodeKind::Sub ? '-'
                      : n->kind == NodeKind::Mul ? '*'
                                                 : '/';
            print_child(n->lhs, prec(*n->lhs) < p, out);
            out.push_back(op);
            print_child(n->rhs, prec(*n->rhs) <= p, out);
            break;
        }
        case NodeKind::Pow:
            print_child(n->lhs, prec(*n->lhs) <= p, out);
            out.push_back('^');
            print_child(n->rhs, prec(*n->rhs) < p, out);
            break;
        case NodeKind::Call:
            out += func_name(n->func);
            out.push_back('(');
            print_node(n->lhs, out);
            out.push_back(')');
            break;
    }
}

// ---------------------------------------------------------------------------
// Evaluation (plain and dual share one recursion; seed==0 means plain)

struct Dual {
    double v;
    double d;
};

Dual eval_node(const NodePtr& n, const Eigen::VectorXd& x, const Bindings& b, int seed,
               bool grad_mode) {
    Dual r{0, 0};
    switch (n->kind) {
        case NodeKind::Constant:
            r = {n->value, 0};
            break;
        case NodeKind::Variable:
            if (n->var > x.size())
                throw ValidationError("point has length " + std::to_string(x.size()) +
                                      " but expression references x" + std::to_string(n->var));
            r = {x[n->var - 1], n->var == seed ? 1.0 : 0.0};
            break;
        case NodeKind::Param: {
            auto it = b.find(n->name);
            if (it == b.end()) throw ValidationError("unbound parameter '" + n->name + "'");
            r = {it->second, 0};
            break;
        }
        case NodeKind::Neg: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            r = {-a.v, -a.d};
            break;
        }
        case NodeKind::Add: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            Dual c = eval_node(n->rhs, x, b, seed, grad_mode);
            r = {a.v + c.v, a.d + c.d};
            break;
        }
        case NodeKind::Sub: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            Dual c = eval_node(n->rhs, x, b, seed, grad_mode);
            r = {a.v - c.v, a.d - c.d};
            break;
        }
        case NodeKind::Mul: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            Dual c = eval_node(n->rhs, x, b, seed, grad_mode);
            r = {a.v * c.v, a.d * c.v + a.v * c.d};
            break;
        }
        case NodeKind::Div: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            Dual c = eval_node(n->rhs, x, b, seed, grad_mode);
            if (c.v == 0.0) throw DomainError("division by zero", n->offset);
            r = {a.v / c.v, (a.d * c.v - a.v * c.d) / (c.v * c.v)};
            break;
        }
        case NodeKind::Pow: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            Dual e = eval_node(n->rhs, x, b, seed, grad_mode);
            if (n->rhs->has_variable) {
                if (a.v <= 0)
                    throw DomainError("power with non-constant exponent requires a positive base",
                                      n->offset);
                r.v = std::pow(a.v, e.v);
                r.d = grad_mode ? r.v * (e.d * std::log(a.v) + e.v * a.d / a.v) : 0.0;
            } else if (a.v > 0) {
                r.v = std::pow(a.v, e.v);
                r.d = grad_mode && a.d != 0 ? e.v * std::pow(a.v, e.v - 1) * a.d : 0.0;
            } else if (a.v == 0) {
                if (e.v <= 0) throw DomainError("zero base with nonpositive exponent", n->offset);
                r.v = 0.0;
                if (grad_mode && a.d != 0) {
                    if (e.v < 1)
                        throw DomainError("power not differentiable at zero base", n->offset);
                    r.d = e.v == 1 ? a.d : 0.0;
                }
            } else {
                if (!integral_value(e.v))
                    throw DomainError("negative base with non-integer exponent", n->offset);
                r.v = std::pow(a.v, e.v);
                r.d = grad_mode && a.d != 0 ? e.v * std::pow(a.v, e.v - 1) * a.d : 0.0;
            }
            break;
        }
        case NodeKind::Call: {
            Dual a = eval_node(n->lhs, x, b, seed, grad_mode);
            switch (n->func) {
                case Func::Sin:
                    r = {std::sin(a.v), std::cos(a.v) * a.d};
                    break;
                case Func::Cos:
                    r = {std::cos(a.v), -std::sin(a.v) * a.d};
                    break;
                case Func::Exp:
                    r.v = std::exp(a.v);
                    r.d = r.v * a.d;
                    break;
                case Func::Log:
                    if (a.v <= 0) throw DomainError("log of a nonpositive value", n->offset);
                    r = {std::log(a.v), a.d / a.v};
                    break;
                case Func::Sqrt:
                    if (a.v < 0) throw DomainError("sqrt of a negative value", n->offset);
                    if (a.v == 0) {
                        if (grad_mode && a.d != 0)
                            throw DomainError("sqrt not differentiable at zero", n->offset);
                        r = {0.0, 0.0};
                    } else {
                        r.v = std::sqrt(a.v);
                        r.d = a.d / (2.0 * r.v);
                    }
                    break;
                case Func::Abs:
                    if (grad_mode && a.v == 0)
                        throw DomainError("abs is not differentiable at zero", n->offset);
                    r = {std::fabs(a.v), a.v < 0 ? -a.d : a.d};
                    break;
            }
            break;
        }
    }
    if (!std::isfinite(r.v) || !std::isfinite(r.d))
        throw DomainError("non-finite value during evaluation", n->offset);
    return r;
}

NodePtr substitute_node(const NodePtr& n, const Bindings& b) {
    switch (n->kind) {
        case NodeKind::Constant:
        case NodeKind::Variable:
            return n;
        case NodeKind::Param: {
            auto it = b.find(n->name);
            if (it == b.end()) return n;
            if (!std::isfinite(it->second))
                throw ValidationError("non-finite substitution for parameter '" + n->name + "'");
            return make_node({.kind = NodeKind::Constant, .value = it->second, .offset = n->offset});
        }
        default: {
            Node copy = *n;
            copy.lhs = n->lhs ? substitute_node(n->lhs, b) : nullptr;
            copy.rhs = n->rhs ? substitute_node(n->rhs, b) : nullptr;
            if (copy.lhs == n->lhs && copy.rhs == n->rhs) return n;
            return make_node(std::move(copy));
        }
    }
}

bool equal_node(const NodePtr& a, const NodePtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case NodeKind::Constant:
            if (a->value != b->value) return false;
            break;
        case NodeKind::Variable:
            if (a->var != b->var) return false;
            break;
        case NodeKind::Param:
            if (a->name != b->name) return false;
            break;
        case NodeKind::Call:
            if (a->func != b->func) return false;
            break;
        default:
            break;
    }
    return equal_node(a->lhs, b->lhs) && equal_node(a->rhs, b->rhs);
}

void require_root(const Expression& e) {
    if (e.empty()) throw ValidationError("empty expression object");
}

Expression combine(NodeKind kind, const Expression& a, const Expression& b) {
    require_root(a);
    require_root(b);
    std::set<std::string> params = a.params();
    params.insert(b.params().begin(), b.params().end());
    return Expression(make_node({.kind = kind, .lhs = a.root(), .rhs = b.root(), .offset = npos}),
                      std::max(a.num_vars(), b.num_vars()), std::move(params));
}

}  // namespace

Expression parse(std::string_view source, const ParseOptions& opts) {
    if (opts.num_vars < 0) throw ValidationError("negative variable count");
    return Parser(source, opts).run();
}

std::string to_string(const Expression& e) {
    require_root(e);
    std::string out;
    print_node(e.root(), out);
    return out;
}

bool structurally_equal(const Expression& a, const Expression& b) {
    return equal_node(a.root(), b.root());
}

double evaluate(const Expression& e, const Eigen::VectorXd& x, const Bindings& bindings) {
    require_root(e);
    return eval_node(e.root(), x, bindings, 0, false).v;
}

double evaluate(const Expression& e, const Eigen::VectorXd& x, std::optional<long> index) {
    require_root(e);
    if (index.has_value()) {
        if (e.params().size() != 1)
            throw ValidationError("index value supplied but expression references " +
                                  std::to_string(e.params().size()) + " parameter symbols");
        return evaluate(e, x, Bindings{{*e.params().begin(), static_cast<double>(*index)}});
    }
    if (e.has_params())
        throw ValidationError("expression references the index symbol but no index was supplied");
    return evaluate(e, x, Bindings{});
}

Eigen::VectorXd gradient(const Expression& e, const Eigen::VectorXd& x, const Bindings& bindings) {
    require_root(e);
    const int n = e.num_vars();
    if (x.size() < n)
        throw ValidationError("point has length " + std::to_string(x.size()) +
                              " but the expression is over " + std::to_string(n) + " variables");
    Eigen::VectorXd g(n);
    for (int k = 1; k <= n; ++k) g[k - 1] = eval_node(e.root(), x, bindings, k, true).d;
    return g;
}

Expression substitute(const Expression& e, const Bindings& bindings) {
    require_root(e);
    std::set<std::string> remaining;
    for (const auto& p : e.params())
        if (!bindings.count(p)) remaining.insert(p);
    return Expression(substitute_node(e.root(), bindings), e.num_vars(), std::move(remaining));
}

Expression constant(double v) {
    return Expression(make_node({.kind = NodeKind::Constant, .value = v, .offset = npos}), 0, {});
}

Expression variable(int k, int num_vars) {
    if (k < 1 || k > num_vars) throw ValidationError("variable index out of range");
    return Expression(make_node({.kind = NodeKind::Variable, .var = k, .offset = npos}), num_vars, {});
}

Expression add(const Expression& a, const Expression& b) { return combine(NodeKind::Add, a, b); }
Expression sub(const Expression& a, const Expression& b) { return combine(NodeKind::Sub, a, b); }
Expression mul(const Expression& a, const Expression& b) { return combine(NodeKind::Mul, a, b); }
Expression divide(const Expression& a, const Expression& b) { return combine(NodeKind::Div, a, b); }
Expression power(const Expression& a, const Expression& b) { return combine(NodeKind::Pow, a, b); }

Expression negate(const Expression& a) {
    require_root(a);
    return Expression(make_node({.kind = NodeKind::Neg, .lhs = a.root(), .offset = npos}),
                      a.num_vars(), a.params());
}

Expression call(Func f, const Expression& a) {
    require_root(a);
    return Expression(make_node({.kind = NodeKind::Call, .func = f, .lhs = a.root(), .offset = npos}),
                      a.num_vars(), a.params());
}

}  // namespace cqa::expr

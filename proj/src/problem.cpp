#include "cqa/problem.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cqa {

ConstraintSystem ConstraintSystem::realize(const ProblemDocument& doc, long N) {
    doc.validate_structure();
    if (N < 1) throw ValidationError("truncation level must be >= 1");

    ConstraintSystem sys;
    sys.n_ = doc.n;
    sys.truncation_ = N;
    sys.index_symbol_ = doc.index_symbol;

    auto add_entries = [&](const std::vector<EntryDecl>& entries, bool is_eq) {
        for (const EntryDecl& entry : entries) {
            if (!entry.is_family()) {
                expr::Expression g = expr::parse(entry.source, {doc.n, {}});
                sys.constraints_.push_back({*entry.label, is_eq, g, std::nullopt, false,
                                            std::nullopt, expr::to_string(g)});
                continue;
            }
            const FamilyDecl& f = *entry.family;
            if (N < f.lo)
                throw ValidationError("truncation N=" + std::to_string(N) +
                                      " is below the lower bound " + std::to_string(f.lo) +
                                      " of the family at label base " + std::to_string(f.base));
            std::map<std::string, expr::Expression> coeffs;
            std::vector<std::string> params{doc.index_symbol};
            for (const auto& [name, src] : f.coefficients) {
                coeffs.emplace(name, expr::parse(src, {0, {doc.index_symbol}}));
                params.push_back(name);
            }
            expr::Expression tmpl = expr::parse(f.source, {doc.n, params});
            const long hi = f.hi ? std::min(*f.hi, N) : N;
            const Eigen::VectorXd no_x(0);
            for (long i = f.lo; i <= hi; ++i) {
                expr::Bindings bind{{doc.index_symbol, static_cast<double>(i)}};
                for (const auto& [name, ce] : coeffs) {
                    double v = expr::evaluate(ce, no_x,
                                              expr::Bindings{{doc.index_symbol,
                                                              static_cast<double>(i)}});
                    bind[name] = v;
                }
                expr::Expression g = expr::substitute(tmpl, bind);
                if (g.has_params())
                    throw ValidationError("family expression still references parameters after "
                                          "substitution");
                int label = f.base + static_cast<int>(i - f.lo);
                sys.constraints_.push_back({label, is_eq, g, i, !f.hi.has_value(), f.tail_bound,
                                            expr::to_string(g)});
            }
            if (!f.hi) sys.any_infinite_family_ = true;
        }
    };
    add_entries(doc.equalities, true);
    add_entries(doc.inequalities, false);

    std::sort(sys.constraints_.begin(), sys.constraints_.end(),
              [](const RealizedConstraint& a, const RealizedConstraint& b) {
                  return a.label < b.label;
              });
    for (std::size_t k = 0; k < sys.constraints_.size(); ++k) {
        const RealizedConstraint& c = sys.constraints_[k];
        if (k > 0 && sys.constraints_[k - 1].label == c.label)
            throw ValidationError("overlapping labels: label " + std::to_string(c.label) +
                                  " realized twice");
        sys.by_label_[c.label] = k;
        (c.is_equality ? sys.equality_labels_ : sys.inequality_labels_).push_back(c.label);
    }

    if (doc.objective) sys.objective_ = expr::parse(*doc.objective, {doc.n, {}});
    sys.points_ = doc.points;
    return sys;
}

const RealizedConstraint& ConstraintSystem::constraint(int label) const {
    auto it = by_label_.find(label);
    if (it == by_label_.end())
        throw ValidationError("no constraint with label " + std::to_string(label));
    return constraints_[it->second];
}

double ConstraintSystem::value(int label, const Eigen::VectorXd& x) const {
    return expr::evaluate(constraint(label).g, x);
}

Eigen::VectorXd ConstraintSystem::grad(int label, const Eigen::VectorXd& x) const {
    return expr::gradient(constraint(label).g, x);
}

ActiveSet ConstraintSystem::active_set(const Eigen::VectorXd& x, double tol_act) const {
    if (x.size() != n_)
        throw ValidationError("point has dimension " + std::to_string(x.size()) + ", expected " +
                              std::to_string(n_));
    if (!(tol_act >= 0)) throw ValidationError("activity tolerance must be >= 0");
    ActiveSet as;
    as.x = x;
    as.tol = tol_act;
    for (const RealizedConstraint& c : constraints_) {
        double v = expr::evaluate(c.g, x);
        if (c.is_equality) {
            if (std::fabs(v) > tol_act) as.violated.push_back(c.label);
        } else {
            as.slack[c.label] = v;
            if (v > tol_act)
                as.violated.push_back(c.label);
            else if (std::fabs(v) <= tol_act)
                as.active.push_back(c.label);
        }
    }
    as.feasible = as.violated.empty();
    return as;
}

LinearizedCone ConstraintSystem::linearized_cone(const Eigen::VectorXd& x0, double tol_act) const {
    ActiveSet as = active_set(x0, tol_act);
    if (!as.feasible)
        throw FeasibilityError("point is infeasible; cannot form the linearized cone", as.violated);
    LinearizedCone cone;
    cone.x0 = x0;
    cone.n = n_;
    cone.eq_labels = equality_labels_;
    cone.act_labels = as.active;
    cone.eq_rows.resize(static_cast<Eigen::Index>(cone.eq_labels.size()), n_);
    for (std::size_t k = 0; k < cone.eq_labels.size(); ++k)
        cone.eq_rows.row(static_cast<Eigen::Index>(k)) = grad(cone.eq_labels[k], x0).transpose();
    cone.act_rows.resize(static_cast<Eigen::Index>(cone.act_labels.size()), n_);
    for (std::size_t k = 0; k < cone.act_labels.size(); ++k)
        cone.act_rows.row(static_cast<Eigen::Index>(k)) = grad(cone.act_labels[k], x0).transpose();
    return cone;
}

bool cone_contains(const LinearizedCone& cone, const Eigen::VectorXd& d, double tol) {
    if (d.size() != cone.n)
        throw ValidationError("direction has dimension " + std::to_string(d.size()) +
                              ", expected " + std::to_string(cone.n));
    const double scale = tol * d.norm();
    if (d.norm() == 0.0) return true;
    for (Eigen::Index r = 0; r < cone.eq_rows.rows(); ++r)
        if (std::fabs(cone.eq_rows.row(r).dot(d)) > scale) return false;
    for (Eigen::Index r = 0; r < cone.act_rows.rows(); ++r)
        if (cone.act_rows.row(r).dot(d) > scale) return false;
    return true;
}

TangentConeK tangent_cone_of_K(const Eigen::VectorXd& y0, const std::vector<int>& I0,
                               const std::vector<int>& I1, double tol) {
    const long m = y0.size();
    std::vector<int> owner(static_cast<std::size_t>(m), 0);  // 0 unset, 1 eq, 2 ineq
    auto claim = [&](const std::vector<int>& labels, int tag) {
        for (int l : labels) {
            if (l < 1 || l > m)
                throw ValidationError("label " + std::to_string(l) + " outside 1.." +
                                      std::to_string(m));
            if (owner[static_cast<std::size_t>(l - 1)] != 0)
                throw ValidationError("label " + std::to_string(l) + " appears twice in the partition");
            owner[static_cast<std::size_t>(l - 1)] = tag;
        }
    };
    claim(I0, 1);
    claim(I1, 2);
    for (long k = 0; k < m; ++k)
        if (owner[static_cast<std::size_t>(k)] == 0)
            throw ValidationError("label " + std::to_string(k + 1) + " missing from the partition");

    std::vector<int> violated;
    for (long k = 0; k < m; ++k) {
        bool eq = owner[static_cast<std::size_t>(k)] == 1;
        if ((eq && std::fabs(y0[k]) > tol) || (!eq && y0[k] > tol))
            violated.push_back(static_cast<int>(k + 1));
    }
    if (!violated.empty())
        throw FeasibilityError("coefficient vector lies outside the basis cone", violated);

    TangentConeK out;
    out.sign.resize(static_cast<std::size_t>(m));
    for (long k = 0; k < m; ++k) {
        int label = static_cast<int>(k + 1);
        if (owner[static_cast<std::size_t>(k)] == 1) {
            out.sign[static_cast<std::size_t>(k)] = SignClass::Zero;
            out.zero_labels.push_back(label);
        } else if (std::fabs(y0[k]) <= tol) {
            out.sign[static_cast<std::size_t>(k)] = SignClass::NonPos;
            out.nonpos_labels.push_back(label);
        } else {
            out.sign[static_cast<std::size_t>(k)] = SignClass::Free;
            out.free_labels.push_back(label);
        }
    }
    return out;
}

}  // namespace cqa

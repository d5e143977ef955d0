#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cqa/document.hpp"
#include "cqa/errors.hpp"
#include "cqa/expr.hpp"

namespace cqa {

// One constraint of the realized (finite) system.
struct RealizedConstraint {
    int label = 0;
    bool is_equality = false;
    expr::Expression g;                 // closed expression of x only
    std::optional<long> family_index;   // the index value it came from
    bool from_infinite_family = false;  // declared range is unbounded above
    std::optional<double> family_tail_bound;
    std::string source;                 // printable form of g
};

struct ActiveSet {
    Eigen::VectorXd x;
    double tol = 1e-8;
    std::vector<int> active;      // inequality labels with |g_i(x)| <= tol
    std::map<int, double> slack;  // inequality label -> g_i(x)
    bool feasible = true;
    std::vector<int> violated;    // labels with g_i > tol (ineq) or |g_i| > tol (eq)
};

// Gradient rows of the equalities and of the active inequalities at x0.
struct LinearizedCone {
    Eigen::VectorXd x0;
    int n = 0;
    std::vector<int> eq_labels;
    std::vector<int> act_labels;
    Eigen::MatrixXd eq_rows;   // |eq_labels| x n
    Eigen::MatrixXd act_rows;  // |act_labels| x n
};

enum class SignClass { Zero, NonPos, Free };

/// Tangent cone of the basis cone at a coefficient vector y0: coordinates are
// labeled 1..y0.size() and partitioned into equality labels I0 and inequality
// labels I1.
struct TangentConeK {
    std::vector<SignClass> sign;  // per coordinate, in label order
    std::vector<int> zero_labels, nonpos_labels, free_labels;
};

class ConstraintSystem {
public:
    // Expand every family of `doc` up to truncation level N (members with
    // index <= N, clipped by the declared upper bound). Throws
    // ValidationError on label clashes, empty systems, N < 1, or N below a
    // family lower bound.
    static ConstraintSystem realize(const ProblemDocument& doc, long N);

    int n() const { return n_; }
    long truncation() const { return truncation_; }
    const std::string& index_symbol() const { return index_symbol_; }
    const std::vector<RealizedConstraint>& constraints() const { return constraints_; }
    const std::vector<int>& equality_labels() const { return equality_labels_; }
    const std::vector<int>& inequality_labels() const { return inequality_labels_; }
    const std::optional<expr::Expression>& objective() const { return objective_; }
    const std::map<std::string, Eigen::VectorXd>& points() const { return points_; }
    bool any_infinite_family() const { return any_infinite_family_; }

    const RealizedConstraint& constraint(int label) const;
    bool has_label(int label) const { return by_label_.count(label) > 0; }

    double value(int label, const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad(int label, const Eigen::VectorXd& x) const;

    ActiveSet active_set(const Eigen::VectorXd& x, double tol_act = 1e-8) const;

    // Throws FeasibilityError when x0 is infeasible at tol_act.
    LinearizedCone linearized_cone(const Eigen::VectorXd& x0, double tol_act = 1e-8) const;

private:
    int n_ = 0;
    long truncation_ = 0;
    std::string index_symbol_;
    std::vector<RealizedConstraint> constraints_;  // sorted by label
    std::map<int, std::size_t> by_label_;
    std::vector<int> equality_labels_, inequality_labels_;
    std::optional<expr::Expression> objective_;
    std::map<std::string, Eigen::VectorXd> points_;
    bool any_infinite_family_ = false;
};

// Membership of d in the linearized cone: |row.d| <= tol*|d| on equality rows
// and row.d <= tol*|d| on active rows. The zero direction always belongs.
bool cone_contains(const LinearizedCone& cone, const Eigen::VectorXd& d, double tol = 1e-8);

// Sign partition of the tangent cone of the basis cone at y0. I0 and I1 must
// partition {1..y0.size()}; throws FeasibilityError when y0 lies outside the
// cone at tolerance tol.
TangentConeK tangent_cone_of_K(const Eigen::VectorXd& y0, const std::vector<int>& I0,
                               const std::vector<int>& I1, double tol = 1e-8);

}  // namespace cqa

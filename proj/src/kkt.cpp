#include "cqa/kkt.hpp"

#include <algorithm>
#include <cmath>

#include "cqa/expr.hpp"
#include "cqa/numlin.hpp"

namespace cqa::kkt {

namespace {

ActiveSet feasible_active_set(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                              double tol_act) {
    ActiveSet as = sys.active_set(x0, tol_act);
    if (!as.feasible) throw FeasibilityError("x0 is infeasible", as.violated);
    return as;
}

}  // namespace

NormalConePattern normal_cone_pattern(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                      double tol_act) {
    ActiveSet as = feasible_active_set(sys, x0, tol_act);
    NormalConePattern p;
    p.free_labels = sys.equality_labels();
    p.nonneg_labels = as.active;
    for (int l : sys.inequality_labels())
        if (!std::binary_search(as.active.begin(), as.active.end(), l)) p.zero_labels.push_back(l);
    return p;
}

MultiplierResult lagrange_multipliers(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                      double tol_res, double tol_act) {
    if (!sys.objective())
        throw ValidationError("the document declares no objective; multipliers are undefined");
    NormalConePattern pat = normal_cone_pattern(sys, x0, tol_act);

    std::vector<int> cols = pat.free_labels;
    cols.insert(cols.end(), pat.nonneg_labels.begin(), pat.nonneg_labels.end());
    const Eigen::Index m = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd A(sys.n(), m);
    for (Eigen::Index k = 0; k < m; ++k)
        A.col(k) = sys.grad(cols[static_cast<std::size_t>(k)], x0);
    Eigen::VectorXd b = -expr::gradient(*sys.objective(), x0);

    std::vector<int> free_cols(pat.free_labels.size());
    for (std::size_t k = 0; k < free_cols.size(); ++k) free_cols[k] = static_cast<int>(k);
    std::vector<int> nonneg_cols(pat.nonneg_labels.size());
    for (std::size_t k = 0; k < nonneg_cols.size(); ++k)
        nonneg_cols[k] = static_cast<int>(free_cols.size() + k);

    MultiplierResult out;
    numlin::SignedLsq fit;
    try {
        fit = numlin::signed_least_squares(A, b, free_cols, nonneg_cols);
    } catch (const numlin::IterationCapError& e) {
        fit.coeffs = e.best;
        fit.residual = e.best_residual;
        out.note = "active-set iteration cap reached; reporting the best iterate; ";
    }
    for (int l : pat.zero_labels) out.lambda[l] = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) out.lambda[cols[static_cast<std::size_t>(k)]] = fit.coeffs[k];
    out.residual = fit.residual;
    out.iterations = fit.iterations;
    out.kkt = out.residual <= tol_res;
    out.note += "coefficients resolved toward minimum norm among optima";
    return out;
}

double kkt_residual(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                    const std::map<int, double>& lambda, double tol_act) {
    if (!sys.objective())
        throw ValidationError("the document declares no objective; the residual is undefined");
    ActiveSet as = feasible_active_set(sys, x0, tol_act);
    for (const auto& [l, v] : lambda) {
        if (!sys.has_label(l)) throw ValidationError("unknown label " + std::to_string(l));
        const RealizedConstraint& c = sys.constraint(l);
        if (c.is_equality) continue;
        const bool active = std::binary_search(as.active.begin(), as.active.end(), l);
        if (!active && std::fabs(v) > 1e-12)
            throw ValidationError("nonzero multiplier on inactive constraint " + std::to_string(l));
        if (active && v < -1e-12)
            throw ValidationError("negative multiplier on active inequality " + std::to_string(l));
    }
    Eigen::VectorXd r = expr::gradient(*sys.objective(), x0);
    for (const auto& [l, v] : lambda)
        if (v != 0.0) r += v * sys.grad(l, x0);
    return r.norm();
}

ClosednessNote multiplier_set_closedness_note(const ConstraintSystem& sys,
                                              const Eigen::VectorXd& x0, double tol_act,
                                              double tol_rank) {
    NormalConePattern pat = normal_cone_pattern(sys, x0, tol_act);
    ClosednessNote note;
    note.generators = 2 * static_cast<int>(pat.free_labels.size()) +
                      static_cast<int>(pat.nonneg_labels.size());
    Eigen::MatrixXd G(pat.free_labels.size() + pat.nonneg_labels.size(), sys.n());
    Eigen::Index r = 0;
    for (int l : pat.free_labels) G.row(r++) = sys.grad(l, x0).transpose();
    for (int l : pat.nonneg_labels) G.row(r++) = sys.grad(l, x0).transpose();
    if (G.rows() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
        const auto& sigma = svd.singularValues();
        for (Eigen::Index k = 0; k < sigma.size(); ++k)
            if (sigma[k] > std::max(tol_rank * sigma[0], 1e-12)) ++note.generator_rank;
    }
    note.justification =
        "at truncation N=" + std::to_string(sys.truncation()) + " the cone of admissible " +
        "multiplier combinations is generated by " + std::to_string(note.generators) +
        " gradient vectors (rank " + std::to_string(note.generator_rank) +
        "); a finitely generated convex cone is closed, so the multiplier set is closed";
    return note;
}

}  // namespace cqa::kkt

#include "cqa/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cqa::numlin {

namespace {

constexpr double kZeroRowFloor = 1e-12;

bool all_rows_tiny(const Eigen::MatrixXd& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r)
        if (M.row(r).norm() > kZeroRowFloor) return false;
    return true;
}

int rank_from_sigma(const Eigen::VectorXd& sigma, double tol) {
    if (sigma.size() == 0) return 0;
    const double cutoff = tol * sigma[0];
    int r = 0;
    for (Eigen::Index k = 0; k < sigma.size(); ++k)
        if (sigma[k] > cutoff) ++r;
    return r;
}

int matrix_rank(const Eigen::MatrixXd& M, double tol) {
    if (M.rows() == 0 || M.cols() == 0 || all_rows_tiny(M)) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    return rank_from_sigma(svd.singularValues(), tol);
}

}  // namespace

RankProfile numerical_rank(const GradientMatrix& M, double tol_rank) {
    if (static_cast<Eigen::Index>(M.labels.size()) != M.rows.rows())
        throw ValidationError("gradient matrix has " + std::to_string(M.rows.rows()) +
                              " rows but " + std::to_string(M.labels.size()) + " labels");
    if (!(tol_rank > 0)) throw ValidationError("rank tolerance must be positive");

    RankProfile p;
    p.tol = tol_rank;
    if (M.rows.rows() == 0 || M.rows.cols() == 0) return p;

    if (all_rows_tiny(M.rows)) return p;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M.rows);
    p.singular_values = svd.singularValues();
    p.rank = rank_from_sigma(p.singular_values, tol_rank);
    if (p.rank > 0 && p.rank < p.singular_values.size()) {
        const double next = p.singular_values[p.rank];
        if (next > 0 && p.singular_values[p.rank - 1] / next < 1e3) p.marginal = true;
    }

    // Greedy residual-norm pivoting; rows are visited in label order so exact
    // ties resolve to the smallest label.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(M.rows.rows()));
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<Eigen::Index>(k);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return M.labels[static_cast<std::size_t>(a)] < M.labels[static_cast<std::size_t>(b)];
    });

    Eigen::MatrixXd W = M.rows;
    std::vector<bool> chosen(static_cast<std::size_t>(W.rows()), false);
    p.pivot_residual_norms.resize(p.rank);
    for (int k = 0; k < p.rank; ++k) {
        Eigen::Index best = -1;
        double best_norm = -1.0;
        for (Eigen::Index idx : order) {
            if (chosen[static_cast<std::size_t>(idx)]) continue;
            double nrm = W.row(idx).norm();
            if (nrm > best_norm) {
                best_norm = nrm;
                best = idx;
            }
        }
        chosen[static_cast<std::size_t>(best)] = true;
        p.pivot_labels.push_back(M.labels[static_cast<std::size_t>(best)]);
        p.pivot_residual_norms[k] = best_norm;
        if (best_norm > 0) {
            Eigen::RowVectorXd q = W.row(best) / best_norm;
            for (Eigen::Index r = 0; r < W.rows(); ++r)
                if (!chosen[static_cast<std::size_t>(r)]) W.row(r) -= (W.row(r) * q.transpose()) * q;
        }
    }
    return p;  // pivot_labels stay in pick order, aligned with the residual norms
}

Eigen::MatrixXd nullspace(const Eigen::MatrixXd& M, double tol_rank) {
    const Eigen::Index n = M.cols();
    if (n == 0) return Eigen::MatrixXd(0, 0);
    if (M.rows() == 0 || all_rows_tiny(M)) return Eigen::MatrixXd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const int r = rank_from_sigma(svd.singularValues(), tol_rank);
    return svd.matrixV().rightCols(n - r);
}

Eigen::MatrixXd dual_vectors(const Eigen::MatrixXd& M, double tol_rank) {
    const Eigen::Index r = M.rows();
    if (r == 0) throw ValidationError("dual vectors of an empty row set");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    if (all_rows_tiny(M) || rank_from_sigma(sigma, tol_rank) < r)
        throw NumericalError("row set is rank-deficient; dual vectors do not exist");
    Eigen::MatrixXd D = svd.matrixV() * sigma.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    return D;
}

SplitReport split_check(const Eigen::MatrixXd& M, double tol_rank) {
    SplitReport rep;
    rep.n = M.cols();
    if (rep.n == 0) return rep;
    if (M.rows() == 0 || all_rows_tiny(M)) {
        rep.rowspace_dim = 0;
        rep.nullspace_dim = static_cast<int>(rep.n);
        rep.concatenated_rank = matrix_rank(Eigen::MatrixXd::Identity(rep.n, rep.n), tol_rank);
        rep.ok = rep.concatenated_rank == rep.n;
        return rep;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const int r = rank_from_sigma(svd.singularValues(), tol_rank);
    rep.rowspace_dim = r;
    rep.nullspace_dim = static_cast<int>(rep.n) - r;
    Eigen::MatrixXd concat(rep.n, rep.n);
    concat.leftCols(r) = svd.matrixV().leftCols(r);
    concat.rightCols(rep.n - r) = svd.matrixV().rightCols(rep.n - r);
    rep.concatenated_rank = matrix_rank(concat.transpose(), tol_rank);
    rep.ok = (rep.rowspace_dim + rep.nullspace_dim == rep.n) && rep.concatenated_rank == rep.n;
    return rep;
}

SignedLsq signed_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                               const std::vector<int>& free_cols,
                               const std::vector<int>& nonneg_cols) {
    const Eigen::Index m = A.cols();
    if (A.rows() != b.size()) throw ValidationError("A and b have mismatched row counts");
    std::vector<int> klass(static_cast<std::size_t>(m), 0);  // 0 unset, 1 free, 2 nonneg
    auto mark = [&](const std::vector<int>& cols, int tag) {
        for (int c : cols) {
            if (c < 0 || c >= m) throw ValidationError("column index out of range");
            if (klass[static_cast<std::size_t>(c)] != 0)
                throw ValidationError("column " + std::to_string(c) + " classified twice");
            klass[static_cast<std::size_t>(c)] = tag;
        }
    };
    mark(free_cols, 1);
    mark(nonneg_cols, 2);
    for (Eigen::Index c = 0; c < m; ++c)
        if (klass[static_cast<std::size_t>(c)] == 0)
            throw ValidationError("column " + std::to_string(c) + " is neither free nor nonneg");

    SignedLsq out;
    out.coeffs = Eigen::VectorXd::Zero(m);
    if (m == 0) {
        out.residual = b.norm();
        return out;
    }

    std::vector<bool> passive(static_cast<std::size_t>(m), false);
    for (int c : free_cols) passive[static_cast<std::size_t>(c)] = true;

    const int cap = 10 * static_cast<int>(m);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
    const double w_tol = 1e-12 * std::max(1.0, (A.transpose() * b).cwiseAbs().maxCoeff());

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index c = 0; c < m; ++c)
            if (passive[static_cast<std::size_t>(c)]) cols.push_back(c);
        z = Eigen::VectorXd::Zero(m);
        if (cols.empty()) return;
        Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ap, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-12);
        Eigen::VectorXd zp = svd.solve(b);  // minimum-norm least squares
        for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zp[static_cast<Eigen::Index>(k)];
    };

    int iter = 0;
    bool have_solution = false;
    if (!free_cols.empty()) {
        solve_passive(lambda);
        ++iter;
        // A fresh free-only solution may already be overall optimal.
    }
    while (true) {
        if (iter > cap)
            throw IterationCapError("signed least squares exceeded the iteration cap", lambda,
                                    (A * lambda - b).norm());
        Eigen::VectorXd w = A.transpose() * (b - A * lambda);
        Eigen::Index enter = -1;
        double best = w_tol;
        for (Eigen::Index c = 0; c < m; ++c) {
            if (passive[static_cast<std::size_t>(c)]) continue;
            if (w[c] > best) {
                best = w[c];
                enter = c;
            }
        }
        if (enter < 0) {
            have_solution = true;
            break;
        }
        passive[static_cast<std::size_t>(enter)] = true;

        while (true) {
            if (++iter > cap)
                throw IterationCapError("signed least squares exceeded the iteration cap", lambda,
                                        (A * lambda - b).norm());
            Eigen::VectorXd z;
            solve_passive(z);
            bool feasible = true;
            double alpha = 1.0;
            for (Eigen::Index c = 0; c < m; ++c) {
                if (!passive[static_cast<std::size_t>(c)] || klass[static_cast<std::size_t>(c)] != 2)
                    continue;
                if (z[c] < 0) {
                    feasible = false;
                    double step = lambda[c] / (lambda[c] - z[c]);
                    alpha = std::min(alpha, step);
                }
            }
            if (feasible) {
                lambda = z;
                break;
            }
            lambda += alpha * (z - lambda);
            for (Eigen::Index c = 0; c < m; ++c) {
                if (!passive[static_cast<std::size_t>(c)] || klass[static_cast<std::size_t>(c)] != 2)
                    continue;
                if (lambda[c] <= 1e-14 * std::max(1.0, lambda.cwiseAbs().maxCoeff())) {
                    lambda[c] = 0.0;
                    passive[static_cast<std::size_t>(c)] = false;
                }
            }
        }
    }
    (void)have_solution;
    out.coeffs = lambda;
    out.residual = (A * lambda - b).norm();
    out.iterations = iter;
    return out;
}

}  // namespace cqa::numlin

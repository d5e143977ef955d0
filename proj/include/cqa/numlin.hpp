#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cqa/errors.hpp"

namespace cqa::numlin {

// Rows of constraint gradients, one row per label, in label order.
struct GradientMatrix {
    std::vector<int> labels;
    Eigen::MatrixXd rows;  // labels.size() x n
};

struct RankProfile {
    int rank = 0;
    std::vector<int> pivot_labels;          // greedy residual-norm pivots
    Eigen::VectorXd singular_values;
    Eigen::VectorXd pivot_residual_norms;   // residual norm at each greedy pick
    double tol = 1e-8;
    bool marginal = false;  // sigma_rank / sigma_rank+1 below 1e3
};

// Rank = number of singular values above tol_rank * sigma_max. A matrix whose
// every row has norm <= 1e-12 has rank 0. Pivot rows are selected greedily by
// largest residual norm after orthogonalizing against the rows already
// chosen; exact ties go to the smallest label.
RankProfile numerical_rank(const GradientMatrix& M, double tol_rank = 1e-8);

// Orthonormal basis of the kernel of M as columns (n x (n - rank)).
Eigen::MatrixXd nullspace(const Eigen::MatrixXd& M, double tol_rank = 1e-8);

// Minimum-norm right inverse D (n x r) of a full-row-rank M (r x n):
// M * D = I_r and every column of D lies in the row space of M. Throws
// NumericalError when M is rank-deficient at tol_rank.
Eigen::MatrixXd dual_vectors(const Eigen::MatrixXd& M, double tol_rank = 1e-8);

struct SplitReport {
    Eigen::Index n = 0;
    int rowspace_dim = 0;
    int nullspace_dim = 0;
    int concatenated_rank = 0;
    bool ok = false;
};

// Confirms row space and kernel of M decompose R^n: dimensions add up to n
// and the concatenated basis has full rank.
SplitReport split_check(const Eigen::MatrixXd& M, double tol_rank = 1e-8);

struct SignedLsq {
    Eigen::VectorXd coeffs;
    double residual = 0;  // |A*coeffs - b|_2
    int iterations = 0;
};

// Iteration cap exceeded; carries the best iterate reached.
struct IterationCapError : NumericalError {
    Eigen::VectorXd best;
    double best_residual;
    IterationCapError(const std::string& msg, Eigen::VectorXd b, double r)
        : NumericalError(msg), best(std::move(b)), best_residual(r) {}
};

// Minimize |A x - b| with x_j free for j in free_cols and x_j >= 0 for j in
// nonneg_cols (0-based column indices partitioning the columns of A).
// Active-set iteration; inner solves are minimum-norm, so on degenerate
// problems the returned x is the minimum-norm optimum. Iteration cap is
// 10 * columns.
SignedLsq signed_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                               const std::vector<int>& free_cols,
                               const std::vector<int>& nonneg_cols);

}  // namespace cqa::numlin

#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqa/problem.hpp"

namespace cqa::kkt {

// Pattern of the normal cone to the basis cone at g(x0): equalities carry free
// multipliers, active inequalities nonnegative ones, inactive inequalities
// zero ones.
struct NormalConePattern {
    std::vector<int> zero_labels;    // inactive inequalities
    std::vector<int> nonneg_labels;  // active inequalities
    std::vector<int> free_labels;    // equalities
};

NormalConePattern normal_cone_pattern(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                      double tol_act = 1e-8);

struct MultiplierResult {
    std::map<int, double> lambda;  // every realized label, inactive ones at zero
    double residual = 0;           // |grad f0 + sum lambda_i grad g_i|_2
    bool kkt = false;
    int iterations = 0;
    std::string note;
};

// Sign-constrained least squares fit of the stationarity condition at x0.
MultiplierResult lagrange_multipliers(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                      double tol_res = 1e-8, double tol_act = 1e-8);

// Stationarity residual for user-supplied multipliers; rejects multipliers
// that break the normal cone pattern.
double kkt_residual(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                    const std::map<int, double>& lambda, double tol_act = 1e-8);

struct ClosednessNote {
    int generators = 0;
    int generator_rank = 0;
    std::string justification;
};

ClosednessNote multiplier_set_closedness_note(const ConstraintSystem& sys,
                                              const Eigen::VectorXd& x0, double tol_act = 1e-8,
                                              double tol_rank = 1e-8);

}  // namespace cqa::kkt

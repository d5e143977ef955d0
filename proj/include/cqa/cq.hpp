#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cqa/numlin.hpp"
#include "cqa/problem.hpp"

namespace cqa::cq {

// Deterministic sampling plan for a ball around `center`. Every preferred
// direction contributes the points center +- (radius/2^k) d for
// k = 0..direction_levels-1 on top of the random samples.
struct NeighborhoodSpec {
    Eigen::VectorXd center;
    double radius = 0.1;
    int samples = 32;  // >= 8
    std::uint64_t seed = 42;
    std::vector<Eigen::VectorXd> preferred_directions;
    int direction_levels = 4;
};

std::vector<Eigen::VectorXd> sample_points(const NeighborhoodSpec& spec);

enum class Verdict { Yes, No, Marginal };
const char* to_cstr(Verdict v);

struct SampleOutcome {
    Eigen::VectorXd x;
    int rank = -1;
    int sub_rank = -1;          // rank of the pivot-row block at this sample
    double span_residual = 0;   // worst scaled distance of a non-pivot gradient to the pivot span
    bool rank_marginal = false;
    bool eval_failed = false;
    std::string error;
};

struct CRCVerdict {
    std::vector<int> J;
    std::vector<int> J2;  // pivot labels at the center
    Verdict holds = Verdict::Marginal;
    numlin::RankProfile center;
    std::vector<SampleOutcome> samples;
    double max_span_residual = 0;
    std::optional<Eigen::VectorXd> witness;  // first sample violating a condition
    std::string note;
};

// Constant-rank check for the gradient family J on a sampled neighborhood of
// x0: the rank must match the center rank at every sample, the center pivot
// block must keep full rank, and every non-pivot gradient must stay within
// tol_span of the pivot span. Evaluation failures at samples downgrade the
// verdict to marginal.
CRCVerdict crc_check(const ConstraintSystem& sys, const std::vector<int>& J,
                     const Eigen::VectorXd& x0, const NeighborhoodSpec& nbhd,
                     double tol_rank = 1e-8, double tol_span = 1e-6);

struct SubsetResult {
    std::vector<int> S;  // subset of the active labels; the tested family is I0 union S
    CRCVerdict verdict;
};

struct CQReport {
    Eigen::VectorXd x0;
    ActiveSet active;
    std::vector<SubsetResult> subsets;
    Verdict overall = Verdict::Marginal;
    bool sampled = false;  // subset list was sampled instead of enumerated
    std::vector<std::vector<int>> failing;
    std::string conditions_note;
    std::string evidence_note;
};

// Checks the constant-rank condition for every family I0 union S over subsets
// S of the active set, all against the same sampled neighborhood. Beyond
// subset_cap active constraints the subsets are sampled (max_subsets of them,
// always including the empty and the full subset); max_subsets == 0 then
// raises ValidationError.
CQReport rcrcq_plus_check(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                          const NeighborhoodSpec& nbhd, double tol_rank = 1e-8,
                          double tol_span = 1e-6, int max_subsets = 0, int subset_cap = 16,
                          double tol_act = 1e-8);

struct DependencePoint {
    Eigen::VectorXd x;
    double max_residual = 0;
    int corrector_iterations = 0;
};

struct DependenceReport {
    std::vector<int> J, J2, dependents;
    bool passed = false;
    double max_residual = 0;
    std::vector<DependencePoint> points;
    std::string note;
};

// Samples the manifold {g_i = 0 : i in J2} near x0 (random tangent steps of
// size up to step_size followed by the corrector) and measures
// max |g_l| over l in J minus J2 at each point. Requires crc_check(J) to hold
// at x0 and g_l(x0) = 0 on J; refuses to run otherwise.
DependenceReport functional_dependence_check(const ConstraintSystem& sys,
                                             const std::vector<int>& J,
                                             const std::vector<int>& J2,
                                             const Eigen::VectorXd& x0, int point_count = 50,
                                             double step_size = 0.05, double tol_dep = 1e-8,
                                             double tol_rank = 1e-8, std::uint64_t seed = 42);

struct WMatrix {
    std::vector<int> row_labels;  // J1
    std::vector<int> col_labels;  // J2
    Eigen::MatrixXd W;            // W(i,j) = Dg_i(x) . d_j with duals taken at x0
};

// W(i,j) = Dg_i(x) applied to the j-th dual vector of the J2 gradient rows at
// x0. At x = x0 the J2 block is the identity.
WMatrix w_matrix(const ConstraintSystem& sys, const std::vector<int>& J1,
                 const std::vector<int>& J2, const Eigen::VectorXd& x0, const Eigen::VectorXd& x,
                 double tol_rank = 1e-8);

// Gradient rows for a label set, in the given label order.
numlin::GradientMatrix gradient_matrix(const ConstraintSystem& sys, const std::vector<int>& labels,
                                       const Eigen::VectorXd& x);

}  // namespace cqa::cq

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cqa/cq.hpp"
#include "cqa/problem.hpp"

namespace cqa::tangent {

struct CorrectorParams {
    double t0 = 0.1;          // coarsest grid level
    double factor = 0.5;      // geometric grid factor
    int levels = 12;
    double tol_newton = 1e-12;
    int max_newton = 50;
    double tol_ratio = 1e-3;  // final |r(t)|/t bound for a tangent verdict
    double tol_feas = 1e-8;
    double tol_refine = 1e-8;
    double tol_rank = 1e-8;
    double tol_act = 1e-8;
    std::uint64_t seed = 42;
};

// {i active at x0 : |Dg_i(x0).d| <= tol |d|}. Throws ValidationError when d
// lies outside the linearized cone (reporting the violated row).
std::vector<int> refined_active_set(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& d, double tol = 1e-8,
                                    double tol_act = 1e-8);

struct CorrectorResult {
    bool converged = false;
    Eigen::VectorXd correction;  // x(xi), so the corrected point is xi + correction
    int iterations = 0;
    double final_residual = 0;
    std::string error;
};

// Gauss-Newton with minimum-norm steps toward {g_i = 0 : i in J2}; the dual
// vectors are recomputed at every iterate. The row family must have full rank
// along the path (rank collapse aborts).
CorrectorResult ljusternik_corrector(const ConstraintSystem& sys, const std::vector<int>& J2,
                                     const Eigen::VectorXd& xi, const CorrectorParams& params = {});

struct LevelRecord {
    double t = 0;
    Eigen::VectorXd correction;
    double ratio = 0;                // |r(t)| / t for the unit direction
    double jd_residual = 0;          // max |g_i| over J(d) at the corrected point
    double monitored_violation = 0;  // max positive part of the other inequalities
    bool corrector_ok = false;
    bool witness = false;  // violation with the repair ball exhausted
    std::string note;
};

enum class Tangency { Tangent, NotTangent, Inconclusive };
const char* to_cstr(Tangency t);

struct TangencyCertificate {
    Eigen::VectorXd d;  // as given; levels step along x0 + t d
    std::vector<int> Jd, J2;
    std::vector<LevelRecord> levels;
    Tangency verdict = Tangency::Inconclusive;
    std::string note;
};

// Certificate for membership of d in the tangent cone at x0. Tangent needs
// monotonically decreasing correction ratios over the last four grid levels,
// a final ratio below tol_ratio, and feasibility at every level; not-tangent
// needs a level whose violation cannot be repaired inside the 0.1 t ball.
TangencyCertificate tangency_test(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                  const Eigen::VectorXd& d, const CorrectorParams& params = {});

enum class H1Class { VerifiedFinite, Verified, Unverified };
const char* to_cstr(H1Class c);

struct H1Verdict {
    Eigen::VectorXd d;
    std::vector<int> refined;       // I(x0, d)
    std::map<int, double> descent;  // active labels outside refined -> Dg_i(x0).d/|d|
    H1Class verdict = H1Class::Unverified;
    std::string reason;
};

// Sufficient-condition check that inequalities outside I(x0,d) stay feasible
// along corrected rays: outright when only finitely many inequalities exist,
// otherwise via strict descent margins, strict slacks, and declared family
// tail bounds. "Unverified" is not a refutation.
H1Verdict h1_check(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                   const Eigen::VectorXd& d, double tol_descent = 1e-6, double tol_slack = 1e-6,
                   const CorrectorParams& params = {});

enum class OracleOutcome { Accept, Reject, Abstain };
const char* to_cstr(OracleOutcome o);

struct OracleRadius {
    double radius = 0;
    int feasible_samples = 0;
    double best_angle = -1;  // radians; -1 when no feasible sample was found
    bool hit = false;
};

struct OracleParams {
    std::vector<double> radii = {5e-2, 2e-2, 8e-3, 3e-3};
    int samples_per_radius = 400;
    int projected_candidates = 64;  // infeasible draws repaired per radius
    double angle_tol = 0.2;
    double tol_feas = 1e-9;
    std::uint64_t seed = 42;
};

struct OracleResult {
    OracleOutcome outcome = OracleOutcome::Abstain;
    std::vector<OracleRadius> radii;
    std::vector<Eigen::VectorXd> sample_directions;  // feasible directions at the finest radius
    std::string note;
};

// Independent membership oracle: searches for feasible points in annuli
// |x - x0| in [0.5 t, 1.5 t] by rejection sampling plus corrector-assisted
// projection, and accepts d iff every radius produced a feasible sample
// within angle_tol of d. Abstains when some radius has no feasible samples.
OracleResult brute_force_tangent_oracle(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                        const Eigen::VectorXd& d, const OracleParams& params = {});

enum class AbadieVerdict { HoldsNumerically, Fails, Inconclusive };
const char* to_cstr(AbadieVerdict v);

struct DirectionResult {
    Eigen::VectorXd d;
    std::string origin;  // coordinate / diagonal / nullspace / random
    TangencyCertificate certificate;
    H1Verdict h1;
    bool h1_ok = true;
    std::string error;
};

struct AbadieParams {
    CorrectorParams corrector;
    cq::NeighborhoodSpec nbhd;  // center is replaced by x0
    int random_directions = 8;
    int max_draws = 10000;
    int spot_check_samples = 128;
    std::uint64_t seed = 42;
};

struct AbadieReport {
    Eigen::VectorXd x0;
    AbadieVerdict verdict = AbadieVerdict::Inconclusive;
    std::optional<Eigen::VectorXd> witness;  // first battery direction found non-tangent
    std::vector<DirectionResult> battery;
    cq::CQReport rcrcq;
    int spot_checked = 0;  // sampled feasible directions tested against the cone
    bool spot_check_ok = true;
    std::string note;
};

// Two-sided numerical test of tangent cone = linearized cone at x0: sampled
// feasible directions must lie in the cone (asserted), and a battery of cone
// directions (coordinates, the diagonal, nullspace basis vectors, seeded
// random members) is run through tangency_test and h1_check. The constant
// rank report rides along so the hypothesis status accompanies the verdict.
AbadieReport abadie_check(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                          const AbadieParams& params = {});

}  // namespace cqa::tangent

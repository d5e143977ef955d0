#include "cqa/tangent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "cqa/numlin.hpp"

namespace cqa::tangent {

namespace {

struct Violation {
    double eq = 0;    // max |g_i| over equalities
    double ineq = 0;  // max positive part over inequalities
};

Violation violation_at(const ConstraintSystem& sys, const Eigen::VectorXd& x) {
    Violation v;
    for (const RealizedConstraint& c : sys.constraints()) {
        double g = expr::evaluate(c.g, x);
        if (c.is_equality)
            v.eq = std::max(v.eq, std::fabs(g));
        else
            v.ineq = std::max(v.ineq, g);
    }
    v.ineq = std::max(v.ineq, 0.0);
    return v;
}

bool is_feasible(const ConstraintSystem& sys, const Eigen::VectorXd& x, double tol) {
    Violation v = violation_at(sys, x);
    return v.eq <= tol && v.ineq <= tol;
}

// Tolerant Gauss-Newton toward {g_i = 0 : i in labels} with minimum-norm
// least-squares steps; copes with dependent rows (used for projections and
// repair searches, not for the strict corrector contract).
CorrectorResult gn_solve(const ConstraintSystem& sys, const std::vector<int>& labels,
                         const Eigen::VectorXd& xi, double tol, int max_iter) {
    CorrectorResult out;
    Eigen::VectorXd y = xi;
    const Eigen::Index m = static_cast<Eigen::Index>(labels.size());
    if (m == 0) {
        out.converged = true;
        out.correction = Eigen::VectorXd::Zero(xi.size());
        return out;
    }
    Eigen::VectorXd v(m);
    for (int it = 0; it <= max_iter; ++it) {
        try {
            for (Eigen::Index k = 0; k < m; ++k)
                v[k] = sys.value(labels[static_cast<std::size_t>(k)], y);
        } catch (const Error& e) {
            out.error = e.what();
            return out;
        }
        out.final_residual = v.cwiseAbs().maxCoeff();
        out.iterations = it;
        if (out.final_residual <= tol) {
            out.converged = true;
            out.correction = y - xi;
            return out;
        }
        if (it == max_iter) break;
        Eigen::MatrixXd M(m, sys.n());
        try {
            for (Eigen::Index k = 0; k < m; ++k)
                M.row(k) = sys.grad(labels[static_cast<std::size_t>(k)], y).transpose();
        } catch (const Error& e) {
            out.error = e.what();
            return out;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-12);
        Eigen::VectorXd s = -svd.solve(v);
        if (!s.allFinite() || s.norm() > 1e3 * (1.0 + y.norm())) {
            out.error = "step diverged";
            return out;
        }
        if (s.norm() <= 1e-16 * (1.0 + y.norm())) {
            out.error = "stalled with residual " + std::to_string(out.final_residual);
            return out;
        }
        y += s;
    }
    out.error = "no convergence in " + std::to_string(max_iter) + " iterations (residual " +
                std::to_string(out.final_residual) + ")";
    return out;
}

// Multi-round projection to the feasible set: repeatedly solve the currently
// violated rows as equalities.
std::optional<Eigen::VectorXd> project_feasible(const ConstraintSystem& sys,
                                                const Eigen::VectorXd& y0, double tol_feas) {
    Eigen::VectorXd y = y0;
    for (int round = 0; round < 4; ++round) {
        if (is_feasible(sys, y, tol_feas)) return y;
        std::vector<int> target = sys.equality_labels();
        for (int l : sys.inequality_labels())
            if (sys.value(l, y) > tol_feas) target.push_back(l);
        if (target.empty()) return std::nullopt;
        CorrectorResult cr = gn_solve(sys, target, y, std::min(tol_feas, 1e-10), 60);
        if (!cr.converged) return std::nullopt;
        y += cr.correction;
    }
    return is_feasible(sys, y, tol_feas) ? std::optional<Eigen::VectorXd>(y) : std::nullopt;
}

std::vector<int> set_difference_sorted(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

const char* to_cstr(Tangency t) {
    switch (t) {
        case Tangency::Tangent: return "tangent";
        case Tangency::NotTangent: return "not-tangent";
        case Tangency::Inconclusive: return "inconclusive";
    }
    return "?";
}

const char* to_cstr(H1Class c) {
    switch (c) {
        case H1Class::VerifiedFinite: return "verified-finite";
        case H1Class::Verified: return "verified";
        case H1Class::Unverified: return "unverified";
    }
    return "?";
}

const char* to_cstr(OracleOutcome o) {
    switch (o) {
        case OracleOutcome::Accept: return "accept";
        case OracleOutcome::Reject: return "reject";
        case OracleOutcome::Abstain: return "abstain";
    }
    return "?";
}

const char* to_cstr(AbadieVerdict v) {
    switch (v) {
        case AbadieVerdict::HoldsNumerically: return "holds-numerically";
        case AbadieVerdict::Fails: return "fails";
        case AbadieVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

std::vector<int> refined_active_set(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& d, double tol, double tol_act) {
    LinearizedCone cone = sys.linearized_cone(x0, tol_act);
    if (d.size() != cone.n) throw ValidationError("direction has the wrong dimension");
    const double scale = tol * d.norm();
    for (Eigen::Index r = 0; r < cone.eq_rows.rows(); ++r)
        if (std::fabs(cone.eq_rows.row(r).dot(d)) > scale)
            throw ValidationError("direction lies outside the linearized cone: equality row " +
                                  std::to_string(cone.eq_labels[static_cast<std::size_t>(r)]) +
                                  " gives " + std::to_string(cone.eq_rows.row(r).dot(d)));
    for (Eigen::Index r = 0; r < cone.act_rows.rows(); ++r)
        if (cone.act_rows.row(r).dot(d) > scale)
            throw ValidationError("direction lies outside the linearized cone: active row " +
                                  std::to_string(cone.act_labels[static_cast<std::size_t>(r)]) +
                                  " gives " + std::to_string(cone.act_rows.row(r).dot(d)));
    std::vector<int> refined;
    for (Eigen::Index r = 0; r < cone.act_rows.rows(); ++r)
        if (std::fabs(cone.act_rows.row(r).dot(d)) <= scale)
            refined.push_back(cone.act_labels[static_cast<std::size_t>(r)]);
    return refined;
}

CorrectorResult ljusternik_corrector(const ConstraintSystem& sys, const std::vector<int>& J2,
                                     const Eigen::VectorXd& xi, const CorrectorParams& params) {
    CorrectorResult out;
    if (xi.size() != sys.n()) throw ValidationError("corrector start has the wrong dimension");
    const Eigen::Index m = static_cast<Eigen::Index>(J2.size());
    if (m == 0) {
        out.converged = true;
        out.correction = Eigen::VectorXd::Zero(sys.n());
        return out;
    }
    Eigen::VectorXd y = xi;
    Eigen::VectorXd v(m);
    for (int it = 0; it <= params.max_newton; ++it) {
        try {
            for (Eigen::Index k = 0; k < m; ++k)
                v[k] = sys.value(J2[static_cast<std::size_t>(k)], y);
        } catch (const Error& e) {
            out.error = std::string("evaluation failed: ") + e.what();
            return out;
        }
        out.final_residual = v.cwiseAbs().maxCoeff();
        out.iterations = it;
        if (out.final_residual <= params.tol_newton) {
            out.converged = true;
            out.correction = y - xi;
            return out;
        }
        if (it == params.max_newton) break;
        Eigen::MatrixXd M(m, sys.n());
        try {
            for (Eigen::Index k = 0; k < m; ++k)
                M.row(k) = sys.grad(J2[static_cast<std::size_t>(k)], y).transpose();
        } catch (const Error& e) {
            out.error = std::string("evaluation failed: ") + e.what();
            return out;
        }
        Eigen::MatrixXd D;
        try {
            D = numlin::dual_vectors(M, params.tol_rank);
        } catch (const NumericalError&) {
            out.error = "rank collapse at iterate " + std::to_string(it);
            return out;
        }
        Eigen::VectorXd s = -D * v;
        if (!s.allFinite() || s.norm() > 1e3 * (1.0 + y.norm())) {
            out.error = "step diverged at iterate " + std::to_string(it);
            return out;
        }
        y += s;
    }
    out.error = "no convergence in " + std::to_string(params.max_newton) +
                " iterations (residual " + std::to_string(out.final_residual) + ")";
    return out;
}

namespace {

// Search the |r| <= 0.1 t |d| ball around xi for a point that restores the
// J(d) residuals to o(t) scale and the monitored inequalities to tol_feas.
std::optional<Eigen::VectorXd> attempt_repair(const ConstraintSystem& sys,
                                              const std::vector<int>& Jd,
                                              const std::vector<int>& monitored,
                                              const Eigen::VectorXd& xi, double t, double dnorm,
                                              const CorrectorParams& params, std::uint64_t seed) {
    const double ball = 0.1 * t * dnorm;
    const double jd_ok = std::max(params.tol_feas, t * std::sqrt(t));
    auto admissible = [&](const Eigen::VectorXd& z) {
        if ((z - xi).norm() > ball) return false;
        try {
            for (int l : Jd)
                if (std::fabs(sys.value(l, z)) > jd_ok) return false;
            for (int l : monitored)
                if (sys.value(l, z) > params.tol_feas) return false;
        } catch (const Error&) {
            return false;
        }
        return true;
    };

    auto try_from = [&](const Eigen::VectorXd& start) -> std::optional<Eigen::VectorXd> {
        if (admissible(start)) return start;
        std::vector<int> target = Jd;
        try {
            for (int l : monitored)
                if (sys.value(l, start) > params.tol_feas) target.push_back(l);
        } catch (const Error&) {
            return std::nullopt;
        }
        CorrectorResult cr = gn_solve(sys, target, start, params.tol_newton, 60);
        if (!cr.converged) return std::nullopt;
        Eigen::VectorXd z = start + cr.correction;
        if (admissible(z)) return z;
        return std::nullopt;
    };

    if (auto z = try_from(xi)) return z;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < 24; ++s) {
        Eigen::VectorXd w(xi.size());
        for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = gauss(rng);
        double nrm = w.norm();
        if (nrm < 1e-12) continue;
        Eigen::VectorXd y = xi + w * (ball * unit(rng) / nrm);
        if (auto z = try_from(y)) return z;
    }
    return std::nullopt;
}

}  // namespace

TangencyCertificate tangency_test(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                  const Eigen::VectorXd& d, const CorrectorParams& params) {
    if (params.levels < 4) throw ValidationError("grid needs at least 4 levels");
    if (d.size() != sys.n()) throw ValidationError("direction has the wrong dimension");
    TangencyCertificate cert;
    cert.d = d;
    const double dnorm = d.norm();
    if (dnorm == 0.0) {
        cert.verdict = Tangency::Tangent;
        cert.note = "zero direction is trivially tangent";
        return cert;
    }

    ActiveSet as = sys.active_set(x0, params.tol_act);
    if (!as.feasible)
        throw FeasibilityError("x0 is infeasible; tangency is undefined", as.violated);

    std::vector<int> refined;
    for (int l : as.active)
        if (std::fabs(sys.grad(l, x0).dot(d)) <= params.tol_refine * dnorm) refined.push_back(l);
    cert.Jd = sys.equality_labels();
    cert.Jd.insert(cert.Jd.end(), refined.begin(), refined.end());
    std::sort(cert.Jd.begin(), cert.Jd.end());

    if (!cert.Jd.empty()) {
        numlin::RankProfile prof =
            numlin::numerical_rank(cq::gradient_matrix(sys, cert.Jd, x0), params.tol_rank);
        cert.J2 = prof.pivot_labels;
        std::sort(cert.J2.begin(), cert.J2.end());
    }
    std::vector<int> monitored = set_difference_sorted(sys.inequality_labels(), cert.Jd);

    // Violation scale for a grid level: must vanish faster than t but needs
    // headroom above the feasibility tolerance.
    auto violates = [&](const Eigen::VectorXd& y, double t) {
        double jd = 0, mon = 0;
        for (int l : cert.Jd) jd = std::max(jd, std::fabs(sys.value(l, y)));
        for (int l : monitored) mon = std::max(mon, sys.value(l, y));
        return jd > t * std::sqrt(t) || mon > params.tol_feas;
    };

    bool any_witness = false, any_fail = false;
    for (int k = 0; k < params.levels; ++k) {
        const double t = params.t0 * std::pow(params.factor, k);
        const Eigen::VectorXd xi = x0 + t * d;
        const double ball = 0.1 * t * dnorm;
        const std::uint64_t level_seed =
            params.seed + static_cast<std::uint64_t>(k) * 0x9e3779b9ull;
        LevelRecord L;
        L.t = t;

        auto search_repair = [&](const char* why) {
            auto repaired = attempt_repair(sys, cert.Jd, monitored, xi, t, dnorm, params,
                                           level_seed);
            if (!repaired) {
                L.witness = true;
                any_witness = true;
                L.note = std::string(why) + "; no repair inside the 0.1 t |d| ball";
            } else {
                L.note = std::string(why) + "; repaired inside the ball, level does not certify";
            }
        };

        CorrectorResult cr = ljusternik_corrector(sys, cert.J2, xi, params);
        if (!cr.converged) {
            L.corrector_ok = false;
            L.note = cr.error;
            bool viol_xi = true;
            try {
                viol_xi = violates(xi, t);
            } catch (const Error&) {
            }
            if (viol_xi) {
                search_repair("corrector failed on a violating level");
                if (!L.witness) any_fail = true;
            } else {
                any_fail = true;
            }
            cert.levels.push_back(std::move(L));
            continue;
        }
        L.corrector_ok = true;
        L.correction = cr.correction;
        L.ratio = cr.correction.norm() / t;
        const Eigen::VectorXd z = xi + cr.correction;
        bool viol_z = false, viol_xi = false;
        try {
            for (int l : cert.Jd)
                L.jd_residual = std::max(L.jd_residual, std::fabs(sys.value(l, z)));
            for (int l : monitored)
                L.monitored_violation = std::max(L.monitored_violation, sys.value(l, z));
            L.monitored_violation = std::max(L.monitored_violation, 0.0);
            viol_z = L.jd_residual > t * std::sqrt(t) ||
                     L.monitored_violation > params.tol_feas;
            viol_xi = violates(xi, t);
        } catch (const Error& e) {
            L.corrector_ok = false;
            L.note = std::string("evaluation failed: ") + e.what();
            any_fail = true;
            cert.levels.push_back(std::move(L));
            continue;
        }
        const bool in_ball = cr.correction.norm() <= ball;
        // A correction that leaves the ball is not evidence of tangency; the
        // level is only suspect when the uncorrected point itself violates.
        if (viol_z) {
            search_repair("residual violation at the corrected point");
        } else if (!in_ball && viol_xi) {
            search_repair("feasibility needs a correction larger than the ball");
        }
        cert.levels.push_back(std::move(L));
    }

    if (any_witness) {
        cert.verdict = Tangency::NotTangent;
        cert.note = "positive witness: some level's violation has no repair in the 0.1 t |d| ball";
        return cert;
    }
    if (any_fail) {
        cert.verdict = Tangency::Inconclusive;
        cert.note = "corrector failed at some level";
        return cert;
    }
    bool clean = true;
    for (const LevelRecord& L : cert.levels)
        if (L.jd_residual > params.tol_feas || L.monitored_violation > params.tol_feas) clean = false;
    bool monotone = true;
    for (std::size_t k = cert.levels.size() - 4; k + 1 < cert.levels.size(); ++k)
        if (cert.levels[k + 1].ratio > cert.levels[k].ratio + 1e-15) monotone = false;
    const double final_ratio = cert.levels.back().ratio;
    if (clean && monotone && final_ratio <= params.tol_ratio) {
        cert.verdict = Tangency::Tangent;
        cert.note = "ratios decrease over the last four levels and feasibility holds at every level";
    } else {
        cert.verdict = Tangency::Inconclusive;
        std::ostringstream os;
        os << "no witness found, but ";
        if (!clean) os << "some level keeps a residual above the feasibility tolerance; ";
        if (!monotone) os << "ratios are not monotone over the last four levels; ";
        if (final_ratio > params.tol_ratio) os << "final ratio " << final_ratio << " exceeds " << params.tol_ratio << "; ";
        cert.note = os.str();
    }
    return cert;
}

H1Verdict h1_check(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                   const Eigen::VectorXd& d, double tol_descent, double tol_slack,
                   const CorrectorParams& params) {
    H1Verdict v;
    v.d = d;
    v.refined = refined_active_set(sys, x0, d, params.tol_refine, params.tol_act);
    ActiveSet as = sys.active_set(x0, params.tol_act);
    const double dnorm = d.norm();

    std::vector<int> strict = set_difference_sorted(as.active, v.refined);
    for (int l : strict) v.descent[l] = sys.grad(l, x0).dot(d) / (dnorm > 0 ? dnorm : 1.0);

    const std::string suffix = "; sufficient conditions at truncation N=" +
                               std::to_string(sys.truncation()) +
                               "; 'unverified' is not a refutation";

    bool any_infinite_ineq = false;
    for (const RealizedConstraint& c : sys.constraints())
        if (!c.is_equality && c.from_infinite_family) any_infinite_ineq = true;
    if (!any_infinite_ineq) {
        v.verdict = H1Class::VerifiedFinite;
        v.reason = "every inequality family has a finite range, so only finitely many "
                   "inequalities exist outside I(x0,d)" + suffix;
        return v;
    }

    double worst_margin = -std::numeric_limits<double>::infinity();
    bool margins_ok = true;
    for (const auto& [l, m] : v.descent) {
        (void)l;
        if (!(m <= -tol_descent)) margins_ok = false;
        worst_margin = std::max(worst_margin, m);
    }
    bool slack_ok = true;
    double worst_slack = -std::numeric_limits<double>::infinity();
    for (int l : sys.inequality_labels()) {
        if (std::binary_search(as.active.begin(), as.active.end(), l)) continue;
        double g = as.slack.at(l);
        worst_slack = std::max(worst_slack, g);
        if (!(g <= -tol_slack)) slack_ok = false;
    }
    bool tails_ok = true;
    std::vector<int> missing_tail;
    for (const RealizedConstraint& c : sys.constraints()) {
        if (c.is_equality || !c.from_infinite_family) continue;
        if (!c.family_tail_bound || !(*c.family_tail_bound <= -tol_slack)) {
            tails_ok = false;
            if (missing_tail.empty() || missing_tail.back() != c.label)
                missing_tail.push_back(c.label);
        }
    }

    std::ostringstream os;
    if (margins_ok && slack_ok && tails_ok) {
        v.verdict = H1Class::Verified;
        os << "strict descent on the active constraints outside I(x0,d)";
        if (!v.descent.empty()) os << " (worst margin " << worst_margin << ")";
        os << ", strict slack on the inactive constraints";
        if (std::isfinite(worst_slack)) os << " (worst slack " << worst_slack << ")";
        os << ", and declared tail bounds on every unbounded inequality family "
              "(declared, not verified numerically)";
    } else {
        v.verdict = H1Class::Unverified;
        if (!margins_ok) os << "some active constraint outside I(x0,d) lacks a strict descent margin; ";
        if (!slack_ok) os << "some inactive constraint has slack above -" << tol_slack << "; ";
        if (!tails_ok) os << "unbounded inequality family without a usable declared tail bound; ";
    }
    v.reason = os.str() + suffix;
    return v;
}

namespace {

struct FeasibleSamples {
    int feasible = 0;
    double best_angle = -1;
    bool hit = false;
    std::vector<Eigen::VectorXd> dirs;
};

// Feasible directions at distance ~t from x0: rejection sampling with a
// projection budget for infeasible draws, plus an optional focus candidate
// x0 + t u that is projected as well.
FeasibleSamples collect_feasible(const ConstraintSystem& sys, const Eigen::VectorXd& x0, double t,
                                 int samples, int projection_budget, double tol_feas,
                                 const Eigen::VectorXd* focus, double angle_tol,
                                 std::mt19937_64& rng, std::size_t keep_dirs) {
    FeasibleSamples out;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Index n = x0.size();

    auto consider = [&](const Eigen::VectorXd& y) {
        const double dist = (y - x0).norm();
        if (dist < 0.5 * t || dist > 1.5 * t) return;
        Eigen::VectorXd dir = (y - x0) / dist;
        ++out.feasible;
        if (out.dirs.size() < keep_dirs) out.dirs.push_back(dir);
        if (focus) {
            double c = std::clamp(dir.dot(*focus), -1.0, 1.0);
            double angle = std::acos(c);
            if (out.best_angle < 0 || angle < out.best_angle) out.best_angle = angle;
            if (angle <= angle_tol) out.hit = true;
        }
    };

    if (focus) {
        Eigen::VectorXd y = x0 + t * (*focus);
        if (is_feasible(sys, y, tol_feas)) {
            consider(y);
        } else if (auto p = project_feasible(sys, y, tol_feas)) {
            consider(*p);
        }
    }
    int projections = 0;
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd w(n);
        double nrm = 0;
        do {
            for (Eigen::Index k = 0; k < n; ++k) w[k] = gauss(rng);
            nrm = w.norm();
        } while (nrm < 1e-12);
        Eigen::VectorXd y = x0 + (t * (0.5 + unit(rng)) / nrm) * w;
        if (is_feasible(sys, y, tol_feas)) {
            consider(y);
        } else if (projections < projection_budget) {
            ++projections;
            if (auto p = project_feasible(sys, y, tol_feas)) consider(*p);
        }
    }
    return out;
}

}  // namespace

OracleResult brute_force_tangent_oracle(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                                        const Eigen::VectorXd& d, const OracleParams& params) {
    if (d.size() != sys.n()) throw ValidationError("direction has the wrong dimension");
    if (d.norm() == 0) throw ValidationError("oracle needs a nonzero direction");
    if (params.radii.empty()) throw ValidationError("oracle needs at least one radius");
    ActiveSet as = sys.active_set(x0, 1e-8);
    if (!as.feasible) throw FeasibilityError("x0 is infeasible", as.violated);

    OracleResult res;
    const Eigen::VectorXd u = d / d.norm();
    double finest = *std::min_element(params.radii.begin(), params.radii.end());
    std::mt19937_64 rng(params.seed);
    bool all_hit = true, any_empty = false;
    for (double t : params.radii) {
        FeasibleSamples fs =
            collect_feasible(sys, x0, t, params.samples_per_radius, params.projected_candidates,
                             params.tol_feas, &u, params.angle_tol, rng,
                             t == finest ? 64 : 0);
        OracleRadius row;
        row.radius = t;
        row.feasible_samples = fs.feasible;
        row.best_angle = fs.best_angle;
        row.hit = fs.hit;
        if (fs.feasible == 0) any_empty = true;
        if (!fs.hit) all_hit = false;
        if (t == finest) res.sample_directions = std::move(fs.dirs);
        res.radii.push_back(row);
    }
    if (any_empty) {
        res.outcome = OracleOutcome::Abstain;
        res.note = "no feasible samples at some radius; the oracle cannot judge";
    } else if (all_hit) {
        res.outcome = OracleOutcome::Accept;
        res.note = "every radius produced a feasible sample within the angle tolerance";
    } else {
        res.outcome = OracleOutcome::Reject;
        res.note = "feasible samples exist at every radius but some radius has none near d";
    }
    return res;
}

AbadieReport abadie_check(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                          const AbadieParams& params) {
    AbadieReport rep;
    rep.x0 = x0;
    const Eigen::Index n = sys.n();

    cq::NeighborhoodSpec nbhd = params.nbhd;
    nbhd.center = x0;
    nbhd.seed = params.seed;
    try {
        rep.rcrcq = cq::rcrcq_plus_check(sys, x0, nbhd, params.corrector.tol_rank);
    } catch (const ValidationError&) {
        // active set above the enumeration cap: fall back to sampled subsets
        rep.rcrcq = cq::rcrcq_plus_check(sys, x0, nbhd, params.corrector.tol_rank, 1e-6, 256);
    }

    LinearizedCone cone = sys.linearized_cone(x0, params.corrector.tol_act);
    auto in_cone = [&](const Eigen::VectorXd& v) {
        return cone_contains(cone, v, params.corrector.tol_refine);
    };

    std::vector<std::pair<Eigen::VectorXd, std::string>> battery;
    auto push_dir = [&](const Eigen::VectorXd& v, const std::string& origin) {
        if (v.norm() == 0 || !in_cone(v)) return;
        Eigen::VectorXd un = v / v.norm();
        for (const auto& [w, o] : battery) {
            (void)o;
            if (un.dot(w / w.norm()) > 1.0 - 1e-9) return;  // duplicate direction
        }
        battery.emplace_back(v, origin);
    };

    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[k] = 1.0;
        push_dir(e, "coordinate +x" + std::to_string(k + 1));
        push_dir(-e, "coordinate -x" + std::to_string(k + 1));
    }
    push_dir(Eigen::VectorXd::Ones(n), "diagonal");
    push_dir(-Eigen::VectorXd::Ones(n), "diagonal");

    Eigen::MatrixXd stacked(cone.eq_rows.rows() + cone.act_rows.rows(), n);
    stacked << cone.eq_rows, cone.act_rows;
    Eigen::MatrixXd kernel = numlin::nullspace(stacked, params.corrector.tol_rank);
    for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
        push_dir(kernel.col(c), "nullspace basis " + std::to_string(c + 1));
        push_dir(-kernel.col(c), "nullspace basis " + std::to_string(c + 1));
    }

    Eigen::MatrixXd eq_kernel = cone.eq_rows.rows() > 0
                                    ? numlin::nullspace(cone.eq_rows, params.corrector.tol_rank)
                                    : Eigen::MatrixXd::Identity(n, n);
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    int kept = 0;
    for (int draw = 0; draw < params.max_draws && kept < params.random_directions; ++draw) {
        if (eq_kernel.cols() == 0) break;
        Eigen::VectorXd z(eq_kernel.cols());
        for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = gauss(rng);
        Eigen::VectorXd v = eq_kernel * z;
        if (v.norm() < 1e-12 || !in_cone(v)) continue;
        std::size_t before = battery.size();
        push_dir(v / v.norm(), "random " + std::to_string(kept + 1));
        if (battery.size() > before) ++kept;
    }

    for (const auto& [dir, origin] : battery) {
        DirectionResult dr;
        dr.d = dir;
        dr.origin = origin;
        try {
            dr.certificate = tangency_test(sys, x0, dir, params.corrector);
        } catch (const Error& e) {
            dr.error = e.what();
        }
        try {
            dr.h1 = h1_check(sys, x0, dir, 1e-6, 1e-6, params.corrector);
        } catch (const Error& e) {
            dr.h1_ok = false;
            if (!dr.error.empty()) dr.error += "; ";
            dr.error += e.what();
        }
        rep.battery.push_back(std::move(dr));
    }

    // Sampled tangent directions must lie in the linearized cone. The
    // tolerance scales with the radius to absorb curvature.
    std::mt19937_64 spot_rng(params.seed + 1);
    for (double t : {1e-2, 1e-3}) {
        FeasibleSamples fs = collect_feasible(sys, x0, t, params.spot_check_samples / 2, 32,
                                              1e-9, nullptr, 0.0, spot_rng, 64);
        const double tol_spot = std::max(10 * t, 1e-6);
        for (const Eigen::VectorXd& dir : fs.dirs) {
            ++rep.spot_checked;
            if (!cone_contains(cone, dir, tol_spot)) rep.spot_check_ok = false;
        }
    }

    bool all_tangent = !rep.battery.empty();
    for (const DirectionResult& dr : rep.battery) {
        if (dr.certificate.verdict == Tangency::NotTangent) {
            rep.verdict = AbadieVerdict::Fails;
            rep.witness = dr.d;
            break;
        }
        if (dr.certificate.verdict != Tangency::Tangent || !dr.error.empty()) all_tangent = false;
    }
    if (!rep.witness) {
        rep.verdict = all_tangent ? AbadieVerdict::HoldsNumerically : AbadieVerdict::Inconclusive;
    }
    std::ostringstream os;
    os << "direction battery of " << rep.battery.size() << " cone members; " << rep.spot_checked
       << " sampled feasible directions checked against the cone"
       << (rep.spot_check_ok ? "" : " (SOME FAILED)");
    rep.note = os.str();
    return rep;
}

}  // namespace cqa::tangent

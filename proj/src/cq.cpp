#include "cqa/cq.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "cqa/tangent.hpp"

namespace cqa::cq {

namespace {

std::vector<int> sorted_unique(std::vector<int> labels) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    return labels;
}

void require_labels(const ConstraintSystem& sys, const std::vector<int>& labels) {
    for (int l : labels)
        if (!sys.has_label(l))
            throw ValidationError("label " + std::to_string(l) + " is not in the realized system");
}

std::string label_list(const std::vector<int>& labels) {
    std::ostringstream os;
    os << "{";
    for (std::size_t k = 0; k < labels.size(); ++k) os << (k ? "," : "") << labels[k];
    os << "}";
    return os.str();
}

// Orthonormal basis of the row space of M (columns of the result).
Eigen::MatrixXd rowspace_basis(const Eigen::MatrixXd& M, double tol_rank) {
    if (M.rows() == 0) return Eigen::MatrixXd(M.cols(), 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    int r = 0;
    if (sigma.size() > 0) {
        bool tiny = true;
        for (Eigen::Index i = 0; i < M.rows(); ++i)
            if (M.row(i).norm() > 1e-12) tiny = false;
        if (!tiny)
            for (Eigen::Index k = 0; k < sigma.size(); ++k)
                if (sigma[k] > tol_rank * sigma[0]) ++r;
    }
    return svd.matrixV().leftCols(r);
}

}  // namespace

const char* to_cstr(Verdict v) {
    switch (v) {
        case Verdict::Yes: return "yes";
        case Verdict::No: return "no";
        case Verdict::Marginal: return "marginal";
    }
    return "?";
}

std::vector<Eigen::VectorXd> sample_points(const NeighborhoodSpec& spec) {
    const Eigen::Index n = spec.center.size();
    if (n < 1) throw ValidationError("neighborhood center is empty");
    if (!(spec.radius > 0)) throw ValidationError("neighborhood radius must be positive");
    if (spec.samples < 8) throw ValidationError("neighborhood needs at least 8 samples");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Eigen::VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(spec.samples) +
                spec.preferred_directions.size() * 2 * static_cast<std::size_t>(spec.direction_levels));
    for (int s = 0; s < spec.samples; ++s) {
        Eigen::VectorXd dir(n);
        double nrm = 0;
        do {
            for (Eigen::Index k = 0; k < n; ++k) dir[k] = gauss(rng);
            nrm = dir.norm();
        } while (nrm < 1e-12);
        double rad = spec.radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
        pts.push_back(spec.center + (rad / nrm) * dir);
    }
    for (const Eigen::VectorXd& d : spec.preferred_directions) {
        if (d.size() != n) throw ValidationError("preferred direction has wrong dimension");
        double nrm = d.norm();
        if (nrm == 0) continue;
        for (int k = 0; k < spec.direction_levels; ++k) {
            double t = spec.radius / std::pow(2.0, k);
            pts.push_back(spec.center + (t / nrm) * d);
            pts.push_back(spec.center - (t / nrm) * d);
        }
    }
    return pts;
}

numlin::GradientMatrix gradient_matrix(const ConstraintSystem& sys, const std::vector<int>& labels,
                                       const Eigen::VectorXd& x) {
    numlin::GradientMatrix G;
    G.labels = labels;
    G.rows.resize(static_cast<Eigen::Index>(labels.size()), sys.n());
    for (std::size_t k = 0; k < labels.size(); ++k)
        G.rows.row(static_cast<Eigen::Index>(k)) = sys.grad(labels[k], x).transpose();
    return G;
}

CRCVerdict crc_check(const ConstraintSystem& sys, const std::vector<int>& J_in,
                     const Eigen::VectorXd& x0, const NeighborhoodSpec& nbhd, double tol_rank,
                     double tol_span) {
    CRCVerdict v;
    v.J = sorted_unique(J_in);
    require_labels(sys, v.J);
    std::ostringstream note;
    note << "numerical evidence at radius " << nbhd.radius << ", "
         << nbhd.samples << " samples (seed " << nbhd.seed << ")";
    v.note = note.str();

    if (v.J.empty()) {
        v.holds = Verdict::Yes;
        v.note += "; empty family holds trivially";
        return v;
    }

    numlin::GradientMatrix G0 = gradient_matrix(sys, v.J, x0);
    v.center = numlin::numerical_rank(G0, tol_rank);
    v.J2 = v.center.pivot_labels;
    std::sort(v.J2.begin(), v.J2.end());

    std::vector<int> non_pivot;
    std::set_difference(v.J.begin(), v.J.end(), v.J2.begin(), v.J2.end(),
                        std::back_inserter(non_pivot));

    bool any_fail = false, any_eval_fail = false, any_marginal = v.center.marginal;
    for (const Eigen::VectorXd& x : sample_points(nbhd)) {
        SampleOutcome s;
        s.x = x;
        try {
            numlin::GradientMatrix G = gradient_matrix(sys, v.J, x);
            numlin::RankProfile p = numlin::numerical_rank(G, tol_rank);
            s.rank = p.rank;
            s.rank_marginal = p.marginal;

            numlin::GradientMatrix G2 = gradient_matrix(sys, v.J2, x);
            s.sub_rank = v.J2.empty() ? 0 : numlin::numerical_rank(G2, tol_rank).rank;

            Eigen::MatrixXd B = rowspace_basis(G2.rows, tol_rank);
            for (int l : non_pivot) {
                Eigen::VectorXd g = sys.grad(l, x);
                Eigen::VectorXd resid = g - B * (B.transpose() * g);
                double scaled = resid.norm() / std::max(1.0, g.norm());
                s.span_residual = std::max(s.span_residual, scaled);
            }
            v.max_span_residual = std::max(v.max_span_residual, s.span_residual);

            bool bad = s.rank != v.center.rank ||
                       s.sub_rank != static_cast<int>(v.J2.size()) ||
                       s.span_residual > tol_span;
            if (bad && !any_fail) {
                any_fail = true;
                v.witness = x;
            }
            any_marginal = any_marginal || p.marginal;
        } catch (const Error& e) {
            s.eval_failed = true;
            s.error = e.what();
            any_eval_fail = true;
        }
        v.samples.push_back(std::move(s));
    }

    if (any_fail)
        v.holds = Verdict::No;
    else if (any_eval_fail || any_marginal)
        v.holds = Verdict::Marginal;
    else
        v.holds = Verdict::Yes;
    return v;
}

CQReport rcrcq_plus_check(const ConstraintSystem& sys, const Eigen::VectorXd& x0,
                          const NeighborhoodSpec& nbhd, double tol_rank, double tol_span,
                          int max_subsets, int subset_cap, double tol_act) {
    CQReport rep;
    rep.x0 = x0;
    rep.active = sys.active_set(x0, tol_act);
    if (!rep.active.feasible)
        throw FeasibilityError("x0 is infeasible; constraint qualification is undefined",
                               rep.active.violated);

    const std::vector<int>& act = rep.active.active;
    const std::vector<int>& I0 = sys.equality_labels();
    const int k = static_cast<int>(act.size());

    std::vector<std::vector<int>> subsets;  // subsets of act, as label lists
    if (k <= subset_cap) {
        const std::uint64_t total = 1ull << k;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            std::vector<int> S;
            for (int b = 0; b < k; ++b)
                if (mask & (1ull << b)) S.push_back(act[static_cast<std::size_t>(b)]);
            subsets.push_back(std::move(S));
        }
    } else {
        if (max_subsets <= 0)
            throw ValidationError("active set has " + std::to_string(k) + " members (cap " +
                                  std::to_string(subset_cap) +
                                  "); pass max_subsets to sample subsets");
        rep.sampled = true;
        std::set<std::vector<int>> seen;
        subsets.push_back({});
        seen.insert({});
        subsets.push_back(act);
        seen.insert(act);
        std::mt19937_64 rng(nbhd.seed);
        std::bernoulli_distribution coin(0.5);
        int guard = 0;
        while (static_cast<int>(subsets.size()) < max_subsets && guard++ < 100 * max_subsets) {
            std::vector<int> S;
            for (int b = 0; b < k; ++b)
                if (coin(rng)) S.push_back(act[static_cast<std::size_t>(b)]);
            if (seen.insert(S).second) subsets.push_back(std::move(S));
        }
    }

    bool any_no = false, any_marginal = false;
    for (std::vector<int>& S : subsets) {
        std::vector<int> J = I0;
        J.insert(J.end(), S.begin(), S.end());
        CRCVerdict cv = crc_check(sys, J, x0, nbhd, tol_rank, tol_span);
        if (cv.holds == Verdict::No) {
            any_no = true;
            rep.failing.push_back(cv.J);
        } else if (cv.holds == Verdict::Marginal) {
            any_marginal = true;
        }
        rep.subsets.push_back({std::move(S), std::move(cv)});
    }
    rep.overall = any_no ? Verdict::No : (any_marginal ? Verdict::Marginal : Verdict::Yes);
    rep.conditions_note =
        "remaining basis, closedness and complement conditions: automatic at finite truncation";
    std::ostringstream ev;
    ev << "one shared neighborhood: radius " << nbhd.radius << ", " << nbhd.samples
       << " samples, seed " << nbhd.seed << "; "
       << (rep.sampled ? "subset sampling" : "exhaustive subset enumeration") << " over "
       << subsets.size() << " families";
    rep.evidence_note = ev.str();
    return rep;
}

DependenceReport functional_dependence_check(const ConstraintSystem& sys,
                                             const std::vector<int>& J_in,
                                             const std::vector<int>& J2_in,
                                             const Eigen::VectorXd& x0, int point_count,
                                             double step_size, double tol_dep, double tol_rank,
                                             std::uint64_t seed) {
    DependenceReport rep;
    rep.J = sorted_unique(J_in);
    rep.J2 = sorted_unique(J2_in);
    require_labels(sys, rep.J);
    if (!std::includes(rep.J.begin(), rep.J.end(), rep.J2.begin(), rep.J2.end()))
        throw ValidationError("J2 must be a subset of J");
    if (point_count < 1) throw ValidationError("point count must be >= 1");
    if (!(step_size > 0)) throw ValidationError("step size must be positive");

    for (int l : rep.J) {
        double v = sys.value(l, x0);
        if (std::fabs(v) > 1e-8)
            throw ValidationError("precondition violated: g_" + std::to_string(l) +
                                  "(x0) = " + std::to_string(v) + " is not zero");
    }

    NeighborhoodSpec nbhd;
    nbhd.center = x0;
    nbhd.radius = step_size;
    nbhd.samples = 16;
    nbhd.seed = seed;
    CRCVerdict crc = crc_check(sys, rep.J, x0, nbhd, tol_rank);
    if (crc.holds == Verdict::No)
        throw ValidationError("precondition violated: constant rank fails for J = " +
                              label_list(rep.J) + " at x0");

    numlin::GradientMatrix G2 = gradient_matrix(sys, rep.J2, x0);
    numlin::GradientMatrix GJ = gradient_matrix(sys, rep.J, x0);
    const int rJ = numlin::numerical_rank(GJ, tol_rank).rank;
    const int r2 = rep.J2.empty() ? 0 : numlin::numerical_rank(G2, tol_rank).rank;
    if (r2 != static_cast<int>(rep.J2.size()) || r2 != rJ)
        throw ValidationError("J2 is not a basis of the gradient family: rank(J2) = " +
                              std::to_string(r2) + ", |J2| = " + std::to_string(rep.J2.size()) +
                              ", rank(J) = " + std::to_string(rJ));

    std::set_difference(rep.J.begin(), rep.J.end(), rep.J2.begin(), rep.J2.end(),
                        std::back_inserter(rep.dependents));

    auto measure = [&](const Eigen::VectorXd& x, int iters) {
        DependencePoint p;
        p.x = x;
        p.corrector_iterations = iters;
        for (int l : rep.dependents)
            p.max_residual = std::max(p.max_residual, std::fabs(sys.value(l, x)));
        rep.max_residual = std::max(rep.max_residual, p.max_residual);
        rep.points.push_back(std::move(p));
    };

    Eigen::MatrixXd kernel = rep.J2.empty() ? Eigen::MatrixXd::Identity(sys.n(), sys.n())
                                            : numlin::nullspace(G2.rows, tol_rank);
    if (kernel.cols() == 0) {
        measure(x0, 0);
        rep.note = "manifold is zero-dimensional at x0; measured at x0 only";
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.1, 1.0);
        tangent::CorrectorParams cp;
        for (int s = 0; s < point_count; ++s) {
            Eigen::VectorXd z(kernel.cols());
            for (Eigen::Index q = 0; q < z.size(); ++q) z[q] = gauss(rng);
            double nrm = z.norm();
            if (nrm < 1e-12) {
                --s;
                continue;
            }
            Eigen::VectorXd xi = x0 + kernel * z * (step_size * unit(rng) / nrm);
            tangent::CorrectorResult cr = tangent::ljusternik_corrector(sys, rep.J2, xi, cp);
            if (!cr.converged)
                throw NumericalError("corrector failed while sampling the manifold: " + cr.error);
            measure(xi + cr.correction, cr.iterations);
        }
        rep.note = "manifold sampled by tangent steps up to " + std::to_string(step_size) +
                   " with corrector return";
    }
    rep.passed = rep.max_residual <= tol_dep;
    return rep;
}

WMatrix w_matrix(const ConstraintSystem& sys, const std::vector<int>& J1,
                 const std::vector<int>& J2, const Eigen::VectorXd& x0, const Eigen::VectorXd& x,
                 double tol_rank) {
    WMatrix wm;
    wm.row_labels = sorted_unique(J1);
    wm.col_labels = sorted_unique(J2);
    require_labels(sys, wm.row_labels);
    require_labels(sys, wm.col_labels);
    if (wm.col_labels.empty()) throw ValidationError("J2 must be nonempty");

    numlin::GradientMatrix G2 = gradient_matrix(sys, wm.col_labels, x0);
    Eigen::MatrixXd D = numlin::dual_vectors(G2.rows, tol_rank);
    numlin::GradientMatrix G1 = gradient_matrix(sys, wm.row_labels, x);
    wm.W = G1.rows * D;
    return wm;
}

}  // namespace cqa::cq

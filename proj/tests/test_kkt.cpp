#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "cqa/document.hpp"
#include "cqa/errors.hpp"
#include "cqa/kkt.hpp"

using namespace cqa;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::string kData = CQA_DATA_DIR;

ConstraintSystem load(const std::string& name, long N) {
    return ConstraintSystem::realize(load_document(kData + "/" + name), N);
}

VectorXd vec2(double a, double b) {
    VectorXd v(2);
    v << a, b;
    return v;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    // the expression grammar has no signed literals
    if (!s.empty() && s[0] == '-') s = "(0 - " + s.substr(1) + ")";
    return s;
}

// Linear term c1*x1 + ... + cn*xn as an expression string.
std::string linear_term(const VectorXd& c) {
    std::string s;
    for (int k = 0; k < c.size(); ++k) {
        if (k) s += " + ";
        s += num(c[k]) + " * x" + std::to_string(k + 1);
    }
    return s;
}

}  // namespace

TEST_CASE("normal cone pattern splits labels by class and activity") {
    ConstraintSystem circle = load("circle.json", 1);
    kkt::NormalConePattern p = kkt::normal_cone_pattern(circle, vec2(1, 0));
    CHECK(p.free_labels == std::vector<int>{1});
    CHECK(p.nonneg_labels.empty());
    CHECK(p.zero_labels.empty());

    ConstraintSystem affine = load("affine.json", 1);
    p = kkt::normal_cone_pattern(affine, vec2(0, 0));
    CHECK(p.free_labels.empty());
    CHECK(p.nonneg_labels == std::vector<int>{1, 2});
    CHECK(p.zero_labels == std::vector<int>{3});

    CHECK_THROWS_AS(kkt::normal_cone_pattern(affine, vec2(3, 3)), FeasibilityError);
}

TEST_CASE("circle minimizer carries the negative half multiplier") {
    ConstraintSystem sys = load("circle.json", 1);
    kkt::MultiplierResult r = kkt::lagrange_multipliers(sys, vec2(1, 0));
    CHECK(r.kkt);
    CHECK(r.residual <= 1e-12);
    REQUIRE(r.lambda.count(1) == 1);
    CHECK(r.lambda.at(1) == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("affine corner resolves both active multipliers at one") {
    ConstraintSystem sys = load("affine.json", 1);
    kkt::MultiplierResult r = kkt::lagrange_multipliers(sys, vec2(0, 0));
    CHECK(r.kkt);
    CHECK(r.residual <= 1e-12);
    REQUIRE(r.lambda.size() == 3);
    CHECK(r.lambda.at(1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.lambda.at(2) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.lambda.at(3) == 0.0);
}

TEST_CASE("multiplier fit requires an objective") {
    ConstraintSystem sys = load("example72.json", 6);
    CHECK_THROWS_AS(kkt::lagrange_multipliers(sys, vec2(0, 0)), ValidationError);
}

TEST_CASE("residual check accepts a valid certificate and rejects pattern breaks") {
    ConstraintSystem sys = load("affine.json", 1);
    VectorXd x0 = vec2(0, 0);
    CHECK(kkt::kkt_residual(sys, x0, {{1, 1.0}, {2, 1.0}, {3, 0.0}}) <= 1e-12);
    // partial certificates default missing labels to zero
    CHECK(kkt::kkt_residual(sys, x0, {{1, 1.0}, {2, 1.0}}) <= 1e-12);
    // nonzero weight on an inactive constraint
    CHECK_THROWS_AS(kkt::kkt_residual(sys, x0, {{1, 1.0}, {2, 1.0}, {3, 0.5}}),
                    ValidationError);
    // negative weight on an active inequality
    CHECK_THROWS_AS(kkt::kkt_residual(sys, x0, {{1, -0.2}, {2, 1.0}}), ValidationError);
    // unknown label
    CHECK_THROWS_AS(kkt::kkt_residual(sys, x0, {{9, 1.0}}), ValidationError);
    // a wrong but pattern-legal certificate just reports a large residual
    CHECK(kkt::kkt_residual(sys, x0, {{1, 0.0}, {2, 0.0}}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("closedness note counts generators and their rank") {
    ConstraintSystem affine = load("affine.json", 1);
    kkt::ClosednessNote n = kkt::multiplier_set_closedness_note(affine, vec2(0, 0));
    // two active inequality gradients, no equalities
    CHECK(n.generators == 2);
    CHECK(n.generator_rank == 2);
    CHECK(n.justification.find("closed") != std::string::npos);

    ConstraintSystem circle = load("circle.json", 1);
    n = kkt::multiplier_set_closedness_note(circle, vec2(1, 0));
    // one equality contributes a +/- pair
    CHECK(n.generators == 2);
    CHECK(n.generator_rank == 1);
}

TEST_CASE("duplicating an active constraint splits weight but keeps the verdict") {
    // affine.json with "-x1" listed twice
    const char* text = R"json({
      "version": "1",
      "n": 2,
      "objective": "x1 + x2",
      "inequalities": [
        {"label": 1, "expr": "-x1"},
        {"label": 2, "expr": "-x2"},
        {"label": 3, "expr": "x1 + x2 - 2"},
        {"label": 4, "expr": "-x1"}
      ],
      "points": {"origin": [0, 0]}
    })json";
    ConstraintSystem base = load("affine.json", 1);
    ConstraintSystem dup = ConstraintSystem::realize(document_from_json_text(text), 1);
    kkt::MultiplierResult a = kkt::lagrange_multipliers(base, vec2(0, 0));
    kkt::MultiplierResult b = kkt::lagrange_multipliers(dup, vec2(0, 0));
    CHECK(a.kkt == b.kkt);
    CHECK(b.residual <= 1e-12);
    // labels 1 and 4 share one gradient; their total matches the single run
    CHECK(b.lambda.at(1) + b.lambda.at(4) == doctest::Approx(a.lambda.at(1)).epsilon(1e-9));
    CHECK(b.lambda.at(2) == doctest::Approx(a.lambda.at(2)).epsilon(1e-9));
}

TEST_CASE("random strictly convex problems recover their planted multipliers") {
    std::mt19937_64 rng(20240819);
    std::uniform_int_distribution<int> coef(-3, 3);
    std::uniform_int_distribution<int> dim(2, 3);
    std::uniform_int_distribution<int> rows(1, 2);
    std::uniform_int_distribution<int> lam_grid(0, 4);

    int built = 0;
    while (built < 10) {
        const int n = dim(rng);
        const int m = rows(rng);
        // integer constraint rows, kept only when linearly independent
        MatrixXd A(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = coef(rng);
        if (Eigen::FullPivLU<MatrixXd>(A).rank() < m) continue;

        // planted nonnegative multipliers on active inequalities a_i . x <= 0
        VectorXd lam(m);
        for (int i = 0; i < m; ++i) lam[i] = 0.5 * lam_grid(rng);
        // objective 0.5|x|^2 + c.x with c = -sum lam_i a_i has gradient c at 0,
        // so stationarity holds with exactly the planted weights
        VectorXd c = -(A.transpose() * lam);

        std::string doc = R"({"version":"1","n":)" + std::to_string(n) +
                          R"(,"objective":"0.5 * ()";
        for (int j = 0; j < n; ++j) {
            if (j) doc += " + ";
            doc += "x" + std::to_string(j + 1) + "^2";
        }
        doc += ") + " + linear_term(c) + "\",\"inequalities\":[";
        for (int i = 0; i < m; ++i) {
            if (i) doc += ",";
            doc += R"({"label":)" + std::to_string(i + 1) + R"(,"expr":")" +
                   linear_term(A.row(i)) + "\"}";
        }
        doc += "]}";

        ConstraintSystem sys = ConstraintSystem::realize(document_from_json_text(doc), 1);
        kkt::MultiplierResult r = kkt::lagrange_multipliers(sys, VectorXd::Zero(n));
        CHECK(r.kkt);
        CHECK(r.residual <= 1e-8);
        // the planted lambda is feasible for the fit; rows are independent so
        // the stationarity system pins it uniquely
        for (int i = 0; i < m; ++i)
            CHECK(r.lambda.at(i + 1) == doctest::Approx(lam[i]).epsilon(1e-7));
        ++built;
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cqa/document.hpp"
#include "cqa/problem.hpp"

using namespace cqa;
using Eigen::VectorXd;

namespace {

const std::string kData = CQA_DATA_DIR;

VectorXd vec2(double a, double b) {
    VectorXd v(2);
    v << a, b;
    return v;
}

VectorXd vec1(double a) {
    VectorXd v(1);
    v << a;
    return v;
}

}  // namespace

TEST_CASE("family realization assigns consecutive labels") {
    ProblemDocument doc = load_document(kData + "/example72.json");
    ConstraintSystem sys = ConstraintSystem::realize(doc, 6);
    REQUIRE(sys.constraints().size() == 6);
    CHECK(sys.inequality_labels() == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK(sys.equality_labels().empty());
    CHECK_FALSE(sys.constraint(1).from_infinite_family);
    CHECK(sys.constraint(5).from_infinite_family);
    CHECK(sys.value(5, vec2(1, 2)) == 10);               // 5 * x1 * x2
    CHECK(sys.grad(5, vec2(1, 2)) == vec2(10, 5));       // 5 * (x2, x1)
    CHECK(sys.any_infinite_family());
}

TEST_CASE("family coefficients are evaluated per index") {
    ProblemDocument doc = load_document(kData + "/example71.json");
    ConstraintSystem sys = ConstraintSystem::realize(doc, 4);
    // constant terms alternate: -1, 0, -1/3, 0
    CHECK(sys.value(1, vec1(0)) == doctest::Approx(-1.0));
    CHECK(sys.value(2, vec1(0)) == doctest::Approx(0.0));
    CHECK(sys.value(3, vec1(0)) == doctest::Approx(-1.0 / 3.0));
    CHECK(sys.value(4, vec1(0)) == doctest::Approx(0.0));
    // h_i(x) = -x^2 + x + c_i
    CHECK(sys.value(2, vec1(0.5)) == doctest::Approx(0.25));
    CHECK(sys.grad(2, vec1(0.25))[0] == doctest::Approx(0.5));
    CHECK(sys.constraint(3).family_tail_bound == -0.001);
}

TEST_CASE("truncation below the family start is rejected") {
    ProblemDocument doc = load_document(kData + "/example72.json");
    CHECK_THROWS_AS(ConstraintSystem::realize(doc, 2), ValidationError);
    CHECK_THROWS_AS(ConstraintSystem::realize(doc, 0), ValidationError);
}

TEST_CASE("truncation changes only the family tail") {
    ProblemDocument doc = load_document(kData + "/example72.json");
    ConstraintSystem small = ConstraintSystem::realize(doc, 4);
    ConstraintSystem big = ConstraintSystem::realize(doc, 7);
    CHECK(small.constraints().size() == 4);
    CHECK(big.constraints().size() == 7);
    for (int l : small.inequality_labels()) {
        VectorXd x = vec2(0.3, -0.7);
        CHECK(small.value(l, x) == big.value(l, x));
    }
}

TEST_CASE("overlapping labels are rejected at load time") {
    const std::string bad = R"({
      "version": "1", "n": 1,
      "inequalities": [
        {"label": 3, "expr": "x1"},
        {"family": {"base": 2, "range": [1, "inf"], "expr": "i * x1"}}
      ]
    })";
    CHECK_THROWS_AS(document_from_json_text(bad), ValidationError);
}

TEST_CASE("unknown document keys are rejected") {
    const std::string bad = R"({"version": "1", "n": 1, "inequality": []})";
    CHECK_THROWS_AS(document_from_json_text(bad), ValidationError);
    CHECK_THROWS_AS(document_from_json_text("{not json"), IoError);
}

TEST_CASE("active set classification") {
    ProblemDocument doc = load_document(kData + "/example72.json");
    ConstraintSystem sys = ConstraintSystem::realize(doc, 6);

    ActiveSet origin = sys.active_set(vec2(0, 0));
    CHECK(origin.feasible);
    CHECK(origin.active == std::vector<int>{1, 2, 3, 4, 5, 6});

    ActiveSet axis = sys.active_set(vec2(1, 0));
    CHECK(axis.feasible);
    CHECK(axis.active == std::vector<int>{2, 3, 4, 5, 6});
    CHECK(axis.slack.at(1) == doctest::Approx(-1.0));

    ActiveSet off = sys.active_set(vec2(1, 1));
    CHECK_FALSE(off.feasible);
    CHECK(off.violated == std::vector<int>{3, 4, 5, 6});

    // boundary ties count as active
    ActiveSet tie = sys.active_set(vec2(1e-9, 0));
    CHECK(tie.active == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("linearized cone membership") {
    ProblemDocument doc = load_document(kData + "/circle.json");
    ConstraintSystem sys = ConstraintSystem::realize(doc, 1);
    LinearizedCone cone = sys.linearized_cone(vec2(1, 0));
    CHECK(cone.eq_labels == std::vector<int>{1});
    CHECK(cone.act_labels.empty());
    CHECK(cone_contains(cone, vec2(0, 1)));
    CHECK(cone_contains(cone, vec2(0, -1)));
    CHECK_FALSE(cone_contains(cone, vec2(1, 0)));
    CHECK(cone_contains(cone, vec2(0, 0)));
    // membership is scale invariant
    CHECK(cone_contains(cone, vec2(0, 500)));
    CHECK_FALSE(cone_contains(cone, vec2(0.5, 0.5)));

    CHECK_THROWS_AS(sys.linearized_cone(vec2(2, 0)), FeasibilityError);
    try {
        sys.linearized_cone(vec2(2, 0));
    } catch (const FeasibilityError& e) {
        CHECK(e.violated == std::vector<int>{1});
    }
}

TEST_CASE("inequality rows enter the cone with a sign") {
    ProblemDocument doc = load_document(kData + "/affine.json");
    ConstraintSystem sys = ConstraintSystem::realize(doc, 1);
    LinearizedCone cone = sys.linearized_cone(vec2(0, 0));
    CHECK(cone.act_labels == std::vector<int>{1, 2});
    CHECK(cone_contains(cone, vec2(1, 0)));
    CHECK(cone_contains(cone, vec2(1, 1)));
    CHECK_FALSE(cone_contains(cone, vec2(-1, 0)));
    CHECK_FALSE(cone_contains(cone, vec2(0, -2)));
}

TEST_CASE("tangent cone of the basis cone") {
    VectorXd y0(3);
    y0 << 0, -1, 0;
    TangentConeK tc = tangent_cone_of_K(y0, {1}, {2, 3});
    CHECK(tc.zero_labels == std::vector<int>{1});
    CHECK(tc.free_labels == std::vector<int>{2});
    CHECK(tc.nonpos_labels == std::vector<int>{3});
    REQUIRE(tc.sign.size() == 3);
    CHECK(tc.sign[0] == SignClass::Zero);
    CHECK(tc.sign[1] == SignClass::Free);
    CHECK(tc.sign[2] == SignClass::NonPos);

    // sampling cross-check: pattern members keep y0 + t z inside K for small t,
    // pattern violations leave K
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    auto in_K = [](const VectorXd& y) {
        return std::fabs(y[0]) <= 1e-12 && y[1] <= 1e-12 && y[2] <= 1e-12;
    };
    for (int trial = 0; trial < 50; ++trial) {
        VectorXd z(3);
        z << 0, u(rng), -std::fabs(u(rng));
        CHECK(in_K(y0 + 1e-3 * z));
    }
    VectorXd bad1(3), bad2(3);
    bad1 << 1, 0, 0;   // breaks the zero pattern
    bad2 << 0, 0, 1;   // breaks the nonpositive pattern
    CHECK_FALSE(in_K(y0 + 1e-3 * bad1));
    CHECK_FALSE(in_K(y0 + 1e-3 * bad2));

    // ties: a value within tolerance of zero classifies as nonpositive
    VectorXd near0(3);
    near0 << 0, -1e-10, -1;
    TangentConeK tc2 = tangent_cone_of_K(near0, {1}, {2, 3});
    CHECK(tc2.sign[1] == SignClass::NonPos);
    CHECK(tc2.sign[2] == SignClass::Free);
}

TEST_CASE("tangent cone input validation") {
    VectorXd y0(2);
    y0 << 0, 0;
    CHECK_THROWS_AS(tangent_cone_of_K(y0, {1}, {1, 2}), ValidationError);  // overlap
    CHECK_THROWS_AS(tangent_cone_of_K(y0, {1}, {}), ValidationError);      // label 2 unowned
    VectorXd off(2);
    off << 0.5, 0;
    CHECK_THROWS_AS(tangent_cone_of_K(off, {1}, {2}), FeasibilityError);
    VectorXd pos(2);
    pos << 0, 0.5;
    CHECK_THROWS_AS(tangent_cone_of_K(pos, {1}, {2}), FeasibilityError);
}

TEST_CASE("declared points are loaded") {
    ProblemDocument doc = load_document(kData + "/example72.json");
    REQUIRE(doc.points.count("origin") == 1);
    CHECK(doc.points.at("origin") == vec2(0, 0));

    const std::string bad = R"({
      "version": "1", "n": 2,
      "inequalities": [{"label": 1, "expr": "-x1"}],
      "points": {"p": [1.0]}
    })";
    CHECK_THROWS_AS(document_from_json_text(bad), ValidationError);
}

TEST_CASE("a document with no constraints yields the full-space cone") {
    ConstraintSystem sys =
        ConstraintSystem::realize(document_from_json_text(R"({"version":"1","n":2})"), 1);
    CHECK(sys.constraints().empty());
    ActiveSet as = sys.active_set(vec2(3, -4));
    CHECK(as.feasible);
    CHECK(as.active.empty());
    CHECK(cone_contains(sys.linearized_cone(vec2(3, -4)), vec2(1, 1)));
}

TEST_CASE("constraint scaling does not change activity or membership") {
    const std::string a = R"({"version":"1","n":2,"inequalities":[{"label":1,"expr":"-x1"}]})";
    const std::string b = R"({"version":"1","n":2,"inequalities":[{"label":1,"expr":"-5*x1"}]})";
    ConstraintSystem sa = ConstraintSystem::realize(document_from_json_text(a), 1);
    ConstraintSystem sb = ConstraintSystem::realize(document_from_json_text(b), 1);
    for (double t : {0.0, 0.5, -0.5}) {
        VectorXd x = vec2(t, 0.3);
        CHECK(sa.active_set(x).feasible == sb.active_set(x).feasible);
        CHECK(sa.active_set(x).active == sb.active_set(x).active);
    }
    LinearizedCone ca = sa.linearized_cone(vec2(0, 0));
    LinearizedCone cb = sb.linearized_cone(vec2(0, 0));
    for (int trial = 0; trial < 20; ++trial) {
        VectorXd d = vec2(std::sin(trial * 0.7), std::cos(trial * 1.3));
        CHECK(cone_contains(ca, d) == cone_contains(cb, d));
    }
}

TEST_CASE("unknown symbols in a family template are rejected at realization") {
    const std::string bad = R"({
      "version": "1", "n": 1,
      "inequalities": [{"family": {"base": 1, "range": [1, "inf"], "expr": "q * x1"}}]
    })";
    ProblemDocument doc = document_from_json_text(bad);  // structure alone is fine
    CHECK_THROWS_AS(ConstraintSystem::realize(doc, 3), ParseError);
}

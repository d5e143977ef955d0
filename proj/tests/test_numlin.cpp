#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cqa/numlin.hpp"

using namespace cqa;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

numlin::GradientMatrix gm(std::vector<int> labels, MatrixXd rows) {
    numlin::GradientMatrix g;
    g.labels = std::move(labels);
    g.rows = std::move(rows);
    return g;
}

}  // namespace

TEST_CASE("numerical rank basics") {
    MatrixXd A(3, 2);
    A << 1, 0, 0, 1, 1, 1;
    numlin::RankProfile p = numlin::numerical_rank(gm({1, 2, 3}, A));
    CHECK(p.rank == 2);
    // greedy pivoting: row 3 has the largest norm, then a tie broken by label
    REQUIRE(p.pivot_labels.size() == 2);
    CHECK(p.pivot_labels[0] == 3);
    CHECK(p.pivot_labels[1] == 1);
    CHECK_FALSE(p.marginal);

    MatrixXd I2 = MatrixXd::Identity(2, 2);
    numlin::RankProfile q = numlin::numerical_rank(gm({7, 9}, I2));
    CHECK(q.pivot_labels == std::vector<int>{7, 9});  // exact tie goes to the smaller label
}

TEST_CASE("rank zero conventions") {
    MatrixXd Z = MatrixXd::Zero(3, 2);
    CHECK(numlin::numerical_rank(gm({1, 2, 3}, Z)).rank == 0);
    MatrixXd tiny = MatrixXd::Constant(2, 2, 1e-14);
    numlin::RankProfile p = numlin::numerical_rank(gm({1, 2}, tiny));
    CHECK(p.rank == 0);
    CHECK(p.pivot_labels.empty());
    MatrixXd empty(0, 3);
    CHECK(numlin::numerical_rank(gm({}, empty)).rank == 0);
}

TEST_CASE("marginal rank decisions are flagged") {
    MatrixXd A = MatrixXd::Zero(3, 3);
    A(0, 0) = 1.0;
    A(1, 1) = 3e-8;  // kept: above 1e-8 * sigma_max
    A(2, 2) = 6e-9;  // dropped, but only a factor 5 below the kept one
    numlin::RankProfile p = numlin::numerical_rank(gm({1, 2, 3}, A));
    CHECK(p.rank == 2);
    CHECK(p.marginal);

    A(2, 2) = 1e-13;  // clearly negligible
    numlin::RankProfile q = numlin::numerical_rank(gm({1, 2, 3}, A));
    CHECK(q.rank == 2);
    CHECK_FALSE(q.marginal);
}

TEST_CASE("rank input validation") {
    MatrixXd A = MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(numlin::numerical_rank(gm({1}, A)), ValidationError);
    CHECK_THROWS_AS(numlin::numerical_rank(gm({1, 2}, A), 0.0), ValidationError);
}

TEST_CASE("nullspace") {
    MatrixXd A(1, 2);
    A << 1, 0;
    MatrixXd N = numlin::nullspace(A, 1e-8);
    REQUIRE(N.cols() == 1);
    CHECK((A * N).norm() <= 1e-12);
    CHECK(N.col(0).norm() == doctest::Approx(1.0));

    MatrixXd Z = MatrixXd::Zero(2, 3);
    MatrixXd NZ = numlin::nullspace(Z, 1e-8);
    CHECK(NZ.cols() == 3);
    CHECK((NZ - MatrixXd::Identity(3, 3)).norm() == 0);

    MatrixXd full = MatrixXd::Identity(3, 3);
    CHECK(numlin::nullspace(full, 1e-8).cols() == 0);
}

TEST_CASE("dual vectors satisfy the delta identity") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 25; ++trial) {
        int r = 1 + static_cast<int>(rng() % 4);
        int n = r + static_cast<int>(rng() % 4);
        MatrixXd M(r, n);
        numlin::RankProfile p;
        do {
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < n; ++j) M(i, j) = g(rng);
            std::vector<int> labels(r);
            for (int i = 0; i < r; ++i) labels[i] = i + 1;
            p = numlin::numerical_rank(gm(labels, M));
        } while (p.rank < r);
        MatrixXd D = numlin::dual_vectors(M, 1e-8);
        CHECK((M * D - MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-10);
    }
    MatrixXd deficient(2, 2);
    deficient << 1, 1, 2, 2;
    CHECK_THROWS_AS(numlin::dual_vectors(deficient, 1e-8), NumericalError);
}

TEST_CASE("rowspace-nullspace decomposition") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        int m = 1 + static_cast<int>(rng() % 5);
        int n = 2 + static_cast<int>(rng() % 5);
        MatrixXd M(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) M(i, j) = g(rng);
        numlin::SplitReport rep = numlin::split_check(M, 1e-8);
        CHECK(rep.ok);
        CHECK(rep.rowspace_dim + rep.nullspace_dim == rep.n);
        CHECK(rep.concatenated_rank == rep.n);
    }
}

TEST_CASE("signed least squares") {
    MatrixXd A(2, 1);
    A << 2, 0;
    VectorXd b(2);
    b << -1, 0;

    SUBCASE("free column reaches the unconstrained optimum") {
        numlin::SignedLsq r = numlin::signed_least_squares(A, b, {0}, {});
        CHECK(r.coeffs[0] == doctest::Approx(-0.5));
        CHECK(r.residual <= 1e-12);
    }
    SUBCASE("nonnegative column clamps at zero") {
        A(0, 0) = 1;
        numlin::SignedLsq r = numlin::signed_least_squares(A, b, {}, {0});
        CHECK(r.coeffs[0] == 0.0);
        CHECK(r.residual == doctest::Approx(1.0));
    }
}

TEST_CASE("all-free agrees with the unconstrained least squares solution") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 4, m = 3;
        MatrixXd A(n, m);
        VectorXd b(n);
        for (int i = 0; i < n; ++i) {
            b[i] = g(rng);
            for (int j = 0; j < m; ++j) A(i, j) = g(rng);
        }
        numlin::SignedLsq r = numlin::signed_least_squares(A, b, {0, 1, 2}, {});
        VectorXd ref = A.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
        CHECK((r.coeffs - ref).norm() <= 1e-10);
    }
}

TEST_CASE("duplicated free columns split the coefficient by minimum norm") {
    MatrixXd A(2, 2);
    A << 1, 1, 0, 0;
    VectorXd b(2);
    b << 1, 0;
    numlin::SignedLsq r = numlin::signed_least_squares(A, b, {0, 1}, {});
    CHECK(r.coeffs[0] == doctest::Approx(0.5));
    CHECK(r.coeffs[1] == doctest::Approx(0.5));
    CHECK(r.residual <= 1e-12);
}

TEST_CASE("mixed free and nonnegative columns") {
    // minimize |a*l1 + c*l2 - b| with l2 >= 0; optimum needs l2 > 0
    MatrixXd A(2, 2);
    A << 1, 1, 1, -1;
    VectorXd b(2);
    b << 3, 1;
    numlin::SignedLsq r = numlin::signed_least_squares(A, b, {0}, {1});
    CHECK(r.coeffs[0] == doctest::Approx(2.0));
    CHECK(r.coeffs[1] == doctest::Approx(1.0));
    CHECK(r.residual <= 1e-12);

    // flip b so the nonnegative coefficient wants to be negative: it stays 0
    b << 1, 3;
    numlin::SignedLsq s = numlin::signed_least_squares(A, b, {0}, {1});
    CHECK(s.coeffs[0] == doctest::Approx(2.0));
    CHECK(s.coeffs[1] == 0.0);
    CHECK(s.residual == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("signed least squares input validation") {
    MatrixXd A(2, 2);
    A << 1, 0, 0, 1;
    VectorXd b(2);
    b << 1, 1;
    CHECK_THROWS_AS(numlin::signed_least_squares(A, b, {0}, {0}), ValidationError);  // overlap
    CHECK_THROWS_AS(numlin::signed_least_squares(A, b, {0}, {}), ValidationError);   // missing col
    CHECK_THROWS_AS(numlin::signed_least_squares(A, b, {0, 1, 2}, {}), ValidationError);
}

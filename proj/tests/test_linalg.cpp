#include <doctest.h>

#include <cmath>

#include "flatnet/linalg.hpp"
#include "support.hpp"

using namespace flatnet;
using namespace flatnet::testing;

TEST_CASE("qr_orthonormalize: small cases") {
    CHECK((qr_orthonormalize(Matrix::Identity(2, 2)) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

    Matrix v(2, 1);
    v << 3, 4;
    const Matrix q = qr_orthonormalize(v);
    CHECK(q(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(q(1, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("qr_orthonormalize matches Gram-Schmidt and is idempotent") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        const Matrix m = random_matrix(5, 2, rng);
        const Matrix q = qr_orthonormalize(m);
        CHECK((q.transpose() * q - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
        // positive-diagonal R makes Q unique, so it equals classical Gram-Schmidt
        CHECK((q - gram_schmidt(m)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((qr_orthonormalize(q) - q).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("qr_orthonormalize rejects rank-deficient input naming the column") {
    Matrix m(3, 2);
    m << 1, 2, 0, 0, 0, 0;
    try {
        qr_orthonormalize(m);
        FAIL("expected an exception");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("column 1") != std::string::npos);
    }
}

TEST_CASE("weighted_least_squares: exact systems") {
    const Matrix c = Matrix::Random(4, 3);
    const auto r = weighted_least_squares(Matrix::Identity(4, 4), c, Vector::Ones(4));
    CHECK((r.solution - c).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(r.full_rank);

    Matrix a(2, 1), b(2, 1);
    a << 1, 2;
    b << 1, 2;
    const auto s = weighted_least_squares(a, b, Vector::Ones(2));
    CHECK(s.solution(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("weighted_least_squares satisfies the weighted normal equations") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = random_matrix(30, 4, rng);
        const Matrix c = random_matrix(30, 3, rng);
        Vector w(30);
        for (int i = 0; i < 30; ++i) w[i] = rng.uniform(0.1, 2.0);
        const Matrix m = weighted_least_squares(a, c, w).solution;

        // oracle: solve (A^T W A) M = A^T W C directly
        const Matrix atw = a.transpose() * w.asDiagonal();
        const Matrix oracle = (atw * a).ldlt().solve(atw * c);
        CHECK((m - oracle).norm() / oracle.norm() < 1e-10);
        const Matrix normal = atw * (a * m - c);
        CHECK(normal.norm() / (atw * c).norm() < 1e-9);
    }
}

TEST_CASE("weighted_least_squares: rank deficiency gives the minimum-norm solution") {
    Rng rng(8);
    Matrix a = random_matrix(10, 3, rng);
    a.col(2) = a.col(0) + a.col(1);
    const Matrix c = random_matrix(10, 2, rng);
    const auto r = weighted_least_squares(a, c, Vector::Ones(10));
    CHECK_FALSE(r.full_rank);
    CHECK(r.rank == 2);
    const Matrix pinv = a.completeOrthogonalDecomposition().pseudoInverse();
    CHECK((r.solution - pinv * c).norm() < 1e-10);
}

TEST_CASE("weighted_least_squares: zero weights are a usage error") {
    CHECK_THROWS_AS(weighted_least_squares(Matrix::Identity(2, 2), Matrix::Identity(2, 2), Vector::Zero(2)),
                    UsageError);
}

TEST_CASE("top_eigvectors") {
    Matrix s = Vector(Eigen::Vector3d(3, 2, 1)).asDiagonal();
    auto e = top_eigvectors(s, 2);
    CHECK(e.values[0] == doctest::Approx(3.0));
    CHECK(e.values[1] == doctest::Approx(2.0));
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));

    Vector v(3);
    v << 1, -2, 2;
    e = top_eigvectors(v * v.transpose(), 1);
    CHECK(std::abs(e.vectors.col(0).dot(v / v.norm())) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(3);
    const Matrix b = random_matrix(6, 6, rng);
    const Matrix spd = b * b.transpose() + Matrix::Identity(6, 6);
    e = top_eigvectors(spd, 3);
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(spd);
    for (int k = 0; k < 3; ++k) {
        CHECK(e.values[k] == doctest::Approx(oracle.eigenvalues()[5 - k]).epsilon(1e-12));
        CHECK(std::abs(e.vectors.col(k).dot(oracle.eigenvectors().col(5 - k))) ==
              doctest::Approx(1.0).epsilon(1e-10));
    }

    Matrix asym = Matrix::Identity(2, 2);
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(top_eigvectors(asym, 1), NumericalError);
}

TEST_CASE("cholesky_jitter") {
    auto r = cholesky_jitter(Matrix::Identity(3, 3), 1e-10);
    CHECK(r.jitter == 0.0);
    CHECK((r.lower - Matrix::Identity(3, 3)).norm() == 0.0);

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 4;
    d(1, 1) = 9;
    r = cholesky_jitter(d, 1e-10);
    CHECK(r.lower(0, 0) == doctest::Approx(2.0));
    CHECK(r.lower(1, 1) == doctest::Approx(3.0));

    // covariance with a duplicated coordinate is singular
    Matrix c(1, 4);
    c << 0.1, 0.5, 0.5, 0.9;
    Matrix s(4, 4);
    for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) s(p, q) = std::exp(-0.5 * std::pow(c(0, p) - c(0, q), 2));
    r = cholesky_jitter(s, 1e-10 * s.trace() / 4);
    CHECK(r.jitter > 0.0);
    const Matrix resid = r.lower * r.lower.transpose() - s - r.jitter * Matrix::Identity(4, 4);
    CHECK(resid.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("scalar_root_find") {
    CHECK(scalar_root_find([](double x) { return x; }, 0.5, {0, 1}, 1e-12) == doctest::Approx(0.5));
    const double r = scalar_root_find([](double x) { return x * x * x; }, 8.0, {0, 3}, 1e-12);
    CHECK(r == doctest::Approx(2.0).epsilon(1e-10));
    CHECK_THROWS_AS(scalar_root_find([](double x) { return x; }, 5.0, {0, 1}, 1e-12), NumericalError);

    // stiff function: stays in the bracket
    auto stiff = [](double x) { return std::exp(40.0 * x); };
    const double s = scalar_root_find(stiff, 10.0, {0, 1}, 1e-9);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(std::abs(stiff(s) - 10.0) <= 1e-9);
}

TEST_CASE("scalar_root_find never leaves its bracket") {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
        const double a = rng.uniform(-3, 3), b = a + rng.uniform(0.01, 4.0);
        const double p = rng.uniform(0.2, 5.0);
        auto g = [p](double x) { return std::copysign(std::pow(std::abs(x), p), x); };
        const double target = g(rng.uniform(a, b));
        const double x = scalar_root_find(g, target, {a, b}, 1e-10);
        CHECK(x >= a);
        CHECK(x <= b);
    }
}

TEST_CASE("SymTensor3 is symmetric by construction") {
    SymTensor3 v(3, 2);
    Vector s(3);
    s << 1, 2, 3;
    v.set_slice(1, 0, s);
    CHECK(v.slice(0, 1) == v.slice(1, 0));
    CHECK(SymTensor3::packed_size(3) == 6);
    CHECK(SymTensor3::packed_index(0, 0, 3) == 0);
    CHECK(SymTensor3::packed_index(1, 1, 3) == 3);
    CHECK(SymTensor3::packed_index(2, 2, 3) == 5);

    // V(c, c) = sum_jk v_jk c_j c_k
    Vector c(2);
    c << 0.5, -2.0;
    Vector expect = 2.0 * 0.5 * -2.0 * s;
    CHECK((v.apply(c) - expect).norm() < 1e-15);
}

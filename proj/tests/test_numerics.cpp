#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "etvbf/numerics.hpp"
#include "test_support.hpp"

using namespace etvbf;
using etvbf::testing::dense_inverse;
using etvbf::testing::random_matrix;
using etvbf::testing::random_spd;

// Reference values from tests/oracles/special_values.py (mpmath, 30 digits).
TEST(Digamma, MatchesReferenceValues) {
    EXPECT_NEAR(digamma(1.0), -0.57721566490153286061, 1e-12);
    EXPECT_NEAR(digamma(0.5), -1.9635100260214234794, 1e-12);
    EXPECT_NEAR(digamma(2.0), 0.42278433509846713939, 1e-12);
    EXPECT_NEAR(digamma(0.001), -1000.5755719318103005, 1e-10);
    EXPECT_NEAR(digamma(0.1), -10.423754940411076795, 1e-10);
    EXPECT_NEAR(digamma(3.7), 1.1671535393615113859, 1e-12);
    EXPECT_NEAR(digamma(10.0), 2.2517525890667211076, 1e-12);
    EXPECT_NEAR(digamma(100.0), 4.6001618527380874002, 1e-12);
    EXPECT_NEAR(digamma(1e6), 13.815510057964190771, 1e-10);
}

TEST(Digamma, ClosedFormIdentities) {
    constexpr double euler_gamma = 0.57721566490153286061;
    EXPECT_NEAR(digamma(1.0), -euler_gamma, 1e-12);
    EXPECT_NEAR(digamma(0.5), -euler_gamma - 2.0 * std::log(2.0), 1e-12);
}

TEST(Digamma, SatisfiesRecurrence) {
    for (double x : {0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
        EXPECT_NEAR(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-10) << "x=" << x;
    }
}

TEST(Digamma, RejectsNonPositive) {
    EXPECT_THROW(digamma(0.0), DomainError);
    EXPECT_THROW(digamma(-1.5), DomainError);
}

TEST(MultivariateDigamma, ReducesToScalarAtDimensionOne) {
    for (double x : {0.3, 1.0, 7.5}) EXPECT_DOUBLE_EQ(multivariate_digamma(1, x), digamma(x));
}

TEST(MultivariateDigamma, ReferenceValues) {
    EXPECT_NEAR(multivariate_digamma(2, 1.0), -2.54072569092295634, 1e-11);
    EXPECT_NEAR(multivariate_digamma(4, 5.0), 5.2542629038683730342, 1e-11);
    EXPECT_NEAR(multivariate_digamma(4, 5.5), 5.7621994118048809707, 1e-11);
}

TEST(MultivariateDigamma, DomainCheck) {
    EXPECT_THROW(multivariate_digamma(3, 1.0), DomainError);  // needs a > 1
    EXPECT_NO_THROW(multivariate_digamma(3, 1.01));
}

TEST(LogMultivariateGamma, ReferenceValues) {
    EXPECT_NEAR(log_multivariate_gamma(1, 1.0), 0.0, 1e-14);
    EXPECT_NEAR(log_multivariate_gamma(2, 1.0), 1.1447298858494001741, 1e-12);
    EXPECT_NEAR(log_multivariate_gamma(2, 1.0), std::log(std::numbers::pi), 1e-12);
    EXPECT_NEAR(log_multivariate_gamma(1, 0.5), 0.57236494292470008707, 1e-12);
    EXPECT_NEAR(log_multivariate_gamma(4, 5.0), 12.058713130313717588, 1e-11);
    EXPECT_THROW(log_multivariate_gamma(2, 0.5), DomainError);
}

TEST(SpdFactor, IdentityHasZeroLogDet) {
    EXPECT_NEAR(spd_factor(Matrix::Identity(3, 3)).log_det(), 0.0, 1e-15);
}

TEST(SpdFactor, DiagonalLogDet) {
    Matrix m = Eigen::Vector2d(4.0, 9.0).asDiagonal();
    EXPECT_NEAR(spd_factor(m).log_det(), std::log(36.0), 1e-12);
    EXPECT_NEAR(spd_factor(m).log_det(), 3.5835189385, 1e-10);
}

TEST(SpdFactor, IndefiniteMatrixIsRejected) {
    Matrix m(2, 2);
    m << 1, 2, 2, 1;
    EXPECT_THROW(spd_factor(m), NotPositiveDefinite);
    EXPECT_THROW(spd_factor(Matrix::Zero(2, 2)), NotPositiveDefinite);
}

TEST(SpdFactor, AsymmetricMatrixIsRejected) {
    Matrix m(2, 2);
    m << 2, 1, 0, 2;
    EXPECT_THROW(spd_factor(m), std::invalid_argument);
}

TEST(SpdFactor, FactorReconstructsInput) {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix m = random_spd(gen, 1 + trial % 6, 0.01, 100.0);
        const SpdFactor f(m);
        const Matrix l = f.lower();
        EXPECT_TRUE((l.diagonal().array() > 0).all());
        EXPECT_LT((l * l.transpose() - m).norm() / m.norm(), 1e-10);
        EXPECT_LT((f.inverse() * m - Matrix::Identity(m.rows(), m.rows())).norm(), 1e-9);
        EXPECT_LT((m * f.solve(Matrix(Matrix::Identity(m.rows(), m.rows()))) -
                   Matrix::Identity(m.rows(), m.rows())).norm(),
                  1e-9);
    }
}

TEST(SpdFactor, LogDetScalesWithDimension) {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index n = 1 + trial % 6;
        const Matrix m = random_spd(gen, n);
        const double c = 0.1 + 0.3 * trial;
        EXPECT_NEAR(spd_log_det(c * m), n * std::log(c) + spd_log_det(m), 1e-10);
    }
}

TEST(BlockInverse, BlockDiagonalIdentity) {
    const Matrix i2 = Matrix::Identity(2, 2);
    const Matrix z2 = Matrix::Zero(2, 2);
    EXPECT_LT((block_inverse(i2, z2, z2, i2) - Matrix::Identity(4, 4)).norm(), 1e-15);
}

TEST(BlockInverse, ScalarBlocks) {
    const Matrix inv = block_inverse(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0),
                                     Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0));
    Matrix expected(2, 2);
    expected << 1, -1, -1, 2;
    EXPECT_LT((inv - expected).norm(), 1e-14);
}

TEST(BlockInverse, MatchesDenseInverse) {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index p = 1 + trial % 5;
        const Eigen::Index q = 1 + (trial / 5) % 3;
        // Well-conditioned: an SPD matrix plus a small nonsymmetric perturbation.
        const Matrix full = random_spd(gen, p + q, 1.0, 4.0) + random_matrix(gen, p + q, p + q, 0.1);
        const Matrix inv = block_inverse(full.topLeftCorner(p, p), full.topRightCorner(p, q),
                                         full.bottomLeftCorner(q, p), full.bottomRightCorner(q, q));
        EXPECT_LT((inv - dense_inverse(full)).norm(), 1e-8);
        EXPECT_LT((inv * full - Matrix::Identity(p + q, p + q)).norm(), 1e-9);
    }
}

TEST(BlockInverse, SingularLeadingBlock) {
    const Matrix z = Matrix::Zero(2, 2);
    EXPECT_THROW(block_inverse(z, Matrix::Identity(2, 2), Matrix::Identity(2, 2), z), Singular);
}

TEST(BlockInverse, SingularSchurComplement) {
    const Matrix one = Matrix::Constant(1, 1, 1.0);
    EXPECT_THROW(block_inverse(one, one, one, one), Singular);
}

TEST(BlockInverse, RejectsNonConformalBlocks) {
    EXPECT_THROW(block_inverse(Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix::Zero(2, 2),
                               Matrix::Identity(1, 1)),
                 std::invalid_argument);
}

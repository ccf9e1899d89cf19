#pragma once

// Generators and brute-force oracles shared by the test suites. Nothing here
// calls into the filter code paths it is used to check.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace etvbf::testing {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Random SPD matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(std::mt19937_64& gen, Eigen::Index n, double lo = 0.5, double hi = 5.0) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(lo, hi);
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = nd(gen);
    const Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix q = qr.householderQ();
    Vector eig(n);
    for (Eigen::Index i = 0; i < n; ++i) eig[i] = ud(gen);
    return q * eig.asDiagonal() * q.transpose();
}

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = nd(gen);
    return a;
}

inline Vector random_vector(std::mt19937_64& gen, Eigen::Index n, double scale = 1.0) {
    return random_matrix(gen, n, 1, scale);
}

/// General dense inverse, used as the brute-force reference.
inline Matrix dense_inverse(const Matrix& m) { return Eigen::FullPivLU<Matrix>(m).inverse(); }

inline double dense_log_det(const Matrix& m) { return std::log(Eigen::FullPivLU<Matrix>(m).determinant()); }

/// Relative Frobenius distance.
inline double rel_err(const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

struct Moments {
    double mean = 0, variance = 0, skewness = 0, excess_kurtosis = 0;
};

inline Moments sample_moments(const std::vector<double>& xs) {
    Moments m;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) m.mean += x;
    m.mean /= n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : xs) {
        const double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.variance = m2;
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return m;
}

}  // namespace etvbf::testing

#pragma once

// Small dense SPD linear algebra and the special functions used by the
// inverse-Wishart / Dirichlet updates.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace etvbf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a Cholesky pivot is not strictly positive.
class NotPositiveDefinite : public std::runtime_error {
public:
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a general (non-SPD) block cannot be inverted.
class Singular : public std::runtime_error {
public:
    explicit Singular(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the domain of a special function.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// psi(x) by upward recurrence to x >= 6 followed by the asymptotic series.
inline double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("digamma: argument must be positive and finite, got " + std::to_string(x));
    }
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli-number coefficients B_2k / (2k), k = 1..7
    const double series =
        inv2 * (1.0 / 12 -
        inv2 * (1.0 / 120 -
        inv2 * (1.0 / 252 -
        inv2 * (1.0 / 240 -
        inv2 * (1.0 / 132 -
        inv2 * (691.0 / 32760 -
        inv2 * (1.0 / 12)))))));
    return acc + std::log(x) - 0.5 * inv - series;
}

/// psi_n(a) = sum_{i=1..n} psi(a + (1 - i)/2); requires a > (n - 1)/2.
inline double multivariate_digamma(int n, double a) {
    if (n < 1) throw DomainError("multivariate_digamma: dimension must be >= 1");
    if (!(a > 0.5 * (n - 1))) {
        throw DomainError("multivariate_digamma: need a > (n-1)/2, got a=" + std::to_string(a) +
                          " n=" + std::to_string(n));
    }
    double sum = 0.0;
    for (int i = 1; i <= n; ++i) sum += digamma(a + 0.5 * (1 - i));
    return sum;
}

/// log Gamma_n(a), the log of the multivariate gamma function.
inline double log_multivariate_gamma(int n, double a) {
    if (n < 1) throw DomainError("log_multivariate_gamma: dimension must be >= 1");
    if (!(a > 0.5 * (n - 1))) {
        throw DomainError("log_multivariate_gamma: need a > (n-1)/2, got a=" + std::to_string(a) +
                          " n=" + std::to_string(n));
    }
    double sum = 0.25 * n * (n - 1) * std::log(std::numbers::pi);
    for (int i = 1; i <= n; ++i) sum += std::lgamma(a + 0.5 * (1 - i));
    return sum;
}

// ---------------------------------------------------------------------------
// SPD factorization
// ---------------------------------------------------------------------------

/// Cholesky factor of an SPD matrix, with the derived queries the filter needs.
class SpdFactor {
public:
    explicit SpdFactor(const Matrix& m) {
        if (m.rows() != m.cols() || m.rows() == 0) {
            throw std::invalid_argument("spd_factor: matrix must be square and non-empty");
        }
        const double scale = m.norm();
        if (!m.allFinite()) throw NotPositiveDefinite("spd_factor: non-finite entries");
        if ((m - m.transpose()).norm() > 1e-9 * std::max(scale, 1e-300)) {
            throw std::invalid_argument("spd_factor: matrix is not symmetric");
        }
        llt_.compute(symmetrize(m));
        if (llt_.info() != Eigen::Success) {
            throw NotPositiveDefinite("spd_factor: non-positive pivot in " +
                                      std::to_string(m.rows()) + "x" + std::to_string(m.rows()) +
                                      " matrix");
        }
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            // LLT accepts tiny positive pivots that underflow to zero after sqrt.
            if (!(llt_.matrixLLT()(i, i) > 0.0)) {
                throw NotPositiveDefinite("spd_factor: zero pivot at index " + std::to_string(i));
            }
        }
    }

    [[nodiscard]] Eigen::Index dim() const { return llt_.matrixLLT().rows(); }

    [[nodiscard]] Matrix lower() const { return llt_.matrixL(); }

    [[nodiscard]] double log_det() const {
        return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    }

    template <typename Rhs>
    [[nodiscard]] Matrix solve(const Eigen::MatrixBase<Rhs>& rhs) const {
        return llt_.solve(rhs);
    }

    [[nodiscard]] Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

    [[nodiscard]] Matrix inverse() const {
        return symmetrize(llt_.solve(Matrix::Identity(dim(), dim())));
    }

private:
    Eigen::LLT<Matrix> llt_;
};

inline SpdFactor spd_factor(const Matrix& m) { return SpdFactor(m); }

inline Matrix spd_inverse(const Matrix& m) { return SpdFactor(m).inverse(); }

inline double spd_log_det(const Matrix& m) { return SpdFactor(m).log_det(); }

// ---------------------------------------------------------------------------
// Block inverse
// ---------------------------------------------------------------------------

/// Inverse of [[A, B], [C, D]] through A^{-1} and the Schur complement
/// E = D - C A^{-1} B.
inline Matrix block_inverse(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d) {
    const auto p = a.rows();
    const auto q = d.rows();
    if (a.cols() != p || d.cols() != q || b.rows() != p || b.cols() != q || c.rows() != q ||
        c.cols() != p) {
        throw std::invalid_argument("block_inverse: non-conformal blocks");
    }

    Eigen::FullPivLU<Matrix> a_lu(a);
    if (!a_lu.isInvertible()) throw Singular("block_inverse: leading block A is singular");
    const Matrix a_inv = a_lu.inverse();

    const Matrix a_inv_b = a_inv * b;
    const Matrix c_a_inv = c * a_inv;
    Eigen::FullPivLU<Matrix> e_lu(d - c * a_inv_b);
    if (!e_lu.isInvertible()) throw Singular("block_inverse: Schur complement is singular");
    const Matrix e_inv = e_lu.inverse();

    Matrix out(p + q, p + q);
    out.topLeftCorner(p, p) = a_inv + a_inv_b * e_inv * c_a_inv;
    out.topRightCorner(p, q) = -a_inv_b * e_inv;
    out.bottomLeftCorner(q, p) = -e_inv * c_a_inv;
    out.bottomRightCorner(q, q) = e_inv;
    return out;
}

}  // namespace etvbf

#pragma once

// Inverse-Wishart, Dirichlet and categorical containers with the moments the
// variational updates consume, plus the seeded RNG used for simulation.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "etvbf/numerics.hpp"

namespace etvbf {

/// IW(P | g, G) over n x n SPD matrices.
struct InverseWishart {
    double dof = 0.0;
    Matrix scale;

    InverseWishart(double dof_, Matrix scale_) : dof(dof_), scale(std::move(scale_)) {
        if (scale.rows() != scale.cols() || scale.rows() == 0) {
            throw std::invalid_argument("InverseWishart: scale must be square");
        }
        if (!(dof > 0.0)) throw std::invalid_argument("InverseWishart: dof must be positive");
    }

    [[nodiscard]] int dim() const { return static_cast<int>(scale.rows()); }
};

struct Dirichlet {
    Vector concentration;

    explicit Dirichlet(Vector alpha) : concentration(std::move(alpha)) {
        if (concentration.size() == 0) throw std::invalid_argument("Dirichlet: empty concentration");
        for (Eigen::Index j = 0; j < concentration.size(); ++j) {
            if (!(concentration[j] > 0.0)) {
                throw std::invalid_argument("Dirichlet: concentration must be positive");
            }
        }
    }
};

/// Probability vector: entries in [0, 1] summing to one.
class CategoricalWeights {
public:
    CategoricalWeights() = default;

    explicit CategoricalWeights(Vector p) : p_(std::move(p)) {
        if (p_.size() == 0) throw std::invalid_argument("CategoricalWeights: empty");
        for (Eigen::Index j = 0; j < p_.size(); ++j) {
            if (!(p_[j] >= 0.0 && p_[j] <= 1.0)) {
                throw std::invalid_argument("CategoricalWeights: component outside [0,1]");
            }
        }
        if (std::abs(p_.sum() - 1.0) > 1e-12) {
            throw std::invalid_argument("CategoricalWeights: components do not sum to 1");
        }
    }

    [[nodiscard]] const Vector& probabilities() const { return p_; }
    [[nodiscard]] double operator[](Eigen::Index j) const { return p_[j]; }
    [[nodiscard]] Eigen::Index size() const { return p_.size(); }

private:
    Vector p_;
};

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

/// E{P^{-1}} = g G^{-1}.
inline Matrix iw_mean_of_inverse(const InverseWishart& iw) {
    return iw.dof * spd_inverse(iw.scale);
}

/// E{log|P|} = log|G| - n log 2 - psi_n(g/2).
inline double iw_expected_logdet(const InverseWishart& iw) {
    const int n = iw.dim();
    return spd_log_det(iw.scale) - n * std::log(2.0) - multivariate_digamma(n, 0.5 * iw.dof);
}

inline double iw_log_pdf(const InverseWishart& iw, const Matrix& p) {
    const int n = iw.dim();
    if (p.rows() != n || p.cols() != n) throw std::invalid_argument("iw_log_pdf: dimension mismatch");
    const SpdFactor pf(p);
    const double g = iw.dof;
    const double trace_term = pf.solve(iw.scale).trace();  // tr(G P^{-1}) = tr(P^{-1} G)
    return 0.5 * g * spd_log_det(iw.scale) - 0.5 * (g + n + 1) * pf.log_det() - 0.5 * trace_term -
           0.5 * g * n * std::log(2.0) - log_multivariate_gamma(n, 0.5 * g);
}

/// E{log mu_j} = psi(alpha_j) - psi(sum alpha).
inline Vector dirichlet_expected_log(const Dirichlet& d) {
    const double psi_total = digamma(d.concentration.sum());
    Vector out(d.concentration.size());
    for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = digamma(d.concentration[j]) - psi_total;
    return out;
}

inline CategoricalWeights dirichlet_mean(const Dirichlet& d) {
    Vector p = d.concentration / d.concentration.sum();
    p /= p.sum();
    return CategoricalWeights(std::move(p));
}

/// Softmax in log space. Shift-invariant; -inf entries get zero weight.
inline CategoricalWeights normalize_log_weights(const Vector& log_w) {
    if (log_w.size() == 0) throw std::invalid_argument("normalize_log_weights: empty input");
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < log_w.size(); ++j) {
        if (std::isnan(log_w[j]) || log_w[j] == std::numeric_limits<double>::infinity()) {
            throw std::invalid_argument("normalize_log_weights: non-finite log weight");
        }
        top = std::max(top, log_w[j]);
    }
    if (top == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("normalize_log_weights: all weights are zero (degenerate)");
    }
    Vector w(log_w.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = std::exp(log_w[j] - top);
    w /= w.sum();
    // Renormalize once more so the sum is exact to the last few ulps.
    w /= w.sum();
    return CategoricalWeights(std::move(w));
}

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Reproducible generator. mt19937_64's output sequence is fixed by the
/// standard; the uniform and normal transforms are done here rather than via
/// <random> distributions, whose algorithms are implementation-defined.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via the Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0, v = 0.0, s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline double sample_uniform(SeededRng& rng) { return rng.uniform(); }

/// mean + L u, u ~ N(0, I), L the lower Cholesky factor of cov.
inline Vector sample_gaussian(SeededRng& rng, const Vector& mean, const Matrix& cov) {
    if (cov.rows() != mean.size()) throw std::invalid_argument("sample_gaussian: dimension mismatch");
    const Matrix l = spd_factor(cov).lower();
    Vector u(mean.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.normal();
    return mean + l * u;
}

}  // namespace etvbf

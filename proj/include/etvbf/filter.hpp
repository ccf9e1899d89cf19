#pragma once

// Event-triggered variational Bayesian filter.
//
// Each step predicts with every nominal process-noise covariance Q_j, then runs
// fixed-point sweeps over the factors
//   (x, z) or x  ->  q(P_{k|k-1}) = IW(g, G)  ->  q(R_k) = IW(s, S)
//   ->  q(lambda) (weights chi)  ->  q(mu) = Dir(alpha)
// until the state iterate stops moving or the sweep cap is reached. When the
// sensor holds its measurement (gamma = 0) the state and the unseen
// measurement are estimated jointly; the trigger's non-transmission is itself
// information, entering through Y.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etvbf/distributions.hpp"
#include "etvbf/numerics.hpp"
#include "etvbf/trigger.hpp"

namespace etvbf {

/// A numerical failure inside a filter step, tagged with the step index.
class FilterFailure : public std::runtime_error {
public:
    FilterFailure(int step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

    [[nodiscard]] int step() const { return step_; }

private:
    int step_;
};

struct FilterConfig {
    std::vector<Matrix> nominal_q;  ///< Q_j, one per mixture component
    std::vector<double> dof_g;      ///< g_j, prior dof of each IW component on P_{k|k-1}
    Matrix R0;                      ///< nominal initial measurement covariance
    double s0 = 5.0;                ///< prior dof on R at k = 0
    Vector alpha0;                  ///< initial Dirichlet concentration
    double rho = 1.0;               ///< forgetting factor in (0, 1]
    TriggerConfig trigger{Matrix::Identity(1, 1)};
    int max_iterations = 50;
    double delta = 1e-8;

    [[nodiscard]] int mixture_size() const { return static_cast<int>(nominal_q.size()); }

    void validate(int n, int m) const {
        const auto M = nominal_q.size();
        if (M == 0) throw std::invalid_argument("FilterConfig: at least one nominal Q is required");
        if (dof_g.size() != M || static_cast<std::size_t>(alpha0.size()) != M) {
            throw std::invalid_argument("FilterConfig: nominal_q, dof_g and alpha0 sizes differ");
        }
        for (std::size_t j = 0; j < M; ++j) {
            if (nominal_q[j].rows() != n || nominal_q[j].cols() != n) {
                throw std::invalid_argument("FilterConfig: nominal Q has wrong dimension");
            }
            (void)spd_factor(nominal_q[j]);
            if (!(dof_g[j] > n + 1)) throw std::invalid_argument("FilterConfig: need g_j > n + 1");
            if (!(alpha0[static_cast<Eigen::Index>(j)] > 0.0)) {
                throw std::invalid_argument("FilterConfig: alpha0 must be positive");
            }
        }
        if (R0.rows() != m || R0.cols() != m) throw std::invalid_argument("FilterConfig: R0 dimension");
        (void)spd_factor(R0);
        if (trigger.Y.rows() != m) throw std::invalid_argument("FilterConfig: Y dimension");
        if (!(s0 > 0.0)) throw std::invalid_argument("FilterConfig: s0 must be positive");
        if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("FilterConfig: rho must be in (0, 1]");
        if (max_iterations < 1) throw std::invalid_argument("FilterConfig: max_iterations must be >= 1");
        if (!(delta > 0.0)) throw std::invalid_argument("FilterConfig: delta must be positive");
    }
};

/// Posterior carried between steps.
struct FilterState {
    Vector x_hat;
    Matrix P;
    double s = 0.0;
    Matrix S;
    Vector alpha;

    static FilterState initial(const FilterConfig& cfg, const Vector& x0_estimate, const Matrix& P0) {
        return FilterState{x0_estimate, P0, cfg.s0, cfg.s0 * cfg.R0, cfg.alpha0};
    }
};

struct Prediction {
    Vector x_pred;
    std::vector<Matrix> P_j;
    std::vector<Matrix> G_j;      ///< g_j * P_j
    std::vector<double> logdet_G; ///< log|G_j|, reused by every mixture update
    double s_prior = 0.0;
    Matrix S_prior;
    Vector alpha_prior;
};

/// Quantities of one fixed-point sweep. Pxz / Pzz are only meaningful on the
/// gamma = 0 branch.
struct IterationState {
    Vector x;
    Matrix P;
    Matrix Pxz;
    Matrix Pzz;
    double g = 0.0;
    Matrix G;
    double s = 0.0;
    Matrix S;
    CategoricalWeights chi;
    Vector alpha;
    Matrix Ptilde;
    Matrix Rtilde;
};

// ---------------------------------------------------------------------------
// Step components
// ---------------------------------------------------------------------------

inline Prediction predict(const FilterState& prev, const Matrix& F, const FilterConfig& cfg) {
    Prediction pred;
    pred.x_pred = F * prev.x_hat;
    const Matrix propagated = F * prev.P * F.transpose();
    const auto M = cfg.nominal_q.size();
    pred.P_j.reserve(M);
    pred.G_j.reserve(M);
    pred.logdet_G.reserve(M);
    for (std::size_t j = 0; j < M; ++j) {
        Matrix pj = symmetrize(propagated + cfg.nominal_q[j]);
        Matrix gj = cfg.dof_g[j] * pj;
        pred.logdet_G.push_back(spd_log_det(gj));
        pred.P_j.push_back(std::move(pj));
        pred.G_j.push_back(std::move(gj));
    }
    pred.alpha_prior = cfg.rho * prev.alpha;
    pred.s_prior = cfg.rho * prev.s;
    pred.S_prior = cfg.rho * prev.S;
    return pred;
}

inline IterationState init_iteration(const Prediction& pred, const FilterConfig& cfg) {
    IterationState it;
    it.x = pred.x_pred;
    it.alpha = pred.alpha_prior;
    it.chi = dirichlet_mean(Dirichlet(pred.alpha_prior));

    const Eigen::Index n = pred.x_pred.size();
    it.g = 0.0;
    it.G = Matrix::Zero(n, n);
    for (std::size_t j = 0; j < pred.G_j.size(); ++j) {
        const double w = it.chi[static_cast<Eigen::Index>(j)];
        it.g += w * cfg.dof_g[j];
        it.G += w * pred.G_j[j];
    }
    it.Ptilde = symmetrize(it.G / it.g);
    it.P = it.Ptilde;

    it.s = pred.s_prior;
    it.S = pred.S_prior;
    it.Rtilde = symmetrize(pred.S_prior / pred.s_prior);
    return it;
}

struct JointUpdate {
    Vector x;
    Matrix P;
    Matrix Pxz;
    Matrix Pzz;
};

/// gamma = 0: blocks of Theta = (E{Phi^{-1}} + diag(0, Y))^{-1} in closed form.
inline JointUpdate update_joint_no_meas(const IterationState& it, const Vector& x_pred, const Matrix& H,
                                        const Matrix& Y) {
    const Eigen::Index m = H.rows();
    const Matrix& pt = it.Ptilde;
    const Matrix pht = pt * H.transpose();
    const Matrix w = symmetrize(H * pht + it.Rtilde);  // H P~ H' + R~

    JointUpdate out;
    out.x = x_pred;

    const SpdFactor inflated(symmetrize(w + spd_inverse(Y)));
    out.P = symmetrize(pt - pht * inflated.solve(pht.transpose()));

    out.Pzz = spd_inverse(symmetrize(spd_inverse(w) + Y));

    // P~ H' (I + Y W)^{-1}, via the transposed system (I + W Y) X' = H P~.
    const Matrix i_wy = Matrix::Identity(m, m) + w * Y;
    Eigen::FullPivLU<Matrix> lu(i_wy);
    if (!lu.isInvertible()) throw Singular("update_joint_no_meas: I + Y W is singular");
    out.Pxz = lu.solve(pht.transpose()).transpose();
    return out;
}

struct StateUpdate {
    Vector x;
    Matrix P;
    Matrix K;
};

/// gamma = 1: Kalman update against the current noise estimates P~, R~.
inline StateUpdate update_state_meas(const IterationState& it, const Vector& x_pred, const Vector& z,
                                     const Matrix& H) {
    const Matrix& pt = it.Ptilde;
    const Matrix pht = pt * H.transpose();
    const SpdFactor w(symmetrize(H * pht + it.Rtilde));

    StateUpdate out;
    out.K = w.solve(pht.transpose()).transpose();
    out.x = x_pred + out.K * (z - H * x_pred);
    out.P = symmetrize(pt - pht * w.solve(pht.transpose()));
    return out;
}

struct PredictedCovUpdate {
    double g = 0.0;
    Matrix G;
    Matrix Ptilde;
};

/// q(P_{k|k-1}) from this sweep's (x, P) and the previous sweep's weights.
inline PredictedCovUpdate update_predicted_cov(const IterationState& it, const Vector& x_pred,
                                               const FilterConfig& cfg, const Prediction& pred) {
    const Vector dx = it.x - x_pred;
    const Matrix a = it.P + dx * dx.transpose();

    PredictedCovUpdate out;
    out.g = 1.0;
    out.G = a;
    for (std::size_t j = 0; j < pred.G_j.size(); ++j) {
        const double w = it.chi[static_cast<Eigen::Index>(j)];
        out.g += w * cfg.dof_g[j];
        out.G += w * pred.G_j[j];
    }
    out.G = symmetrize(out.G);
    out.Ptilde = symmetrize(out.G / out.g);
    return out;
}

struct MeasCovUpdate {
    double s = 0.0;
    Matrix S;
    Matrix Rtilde;
    Matrix B;
};

/// q(R_k). The branch is given by whether a measurement was received.
inline MeasCovUpdate update_meas_cov(const IterationState& it, const std::optional<Vector>& z,
                                     const Matrix& H, const Prediction& pred) {
    MeasCovUpdate out;
    if (z) {
        const Vector resid = *z - H * it.x;
        out.B = resid * resid.transpose() + H * it.P * H.transpose();
    } else {
        const Matrix h_pxz = H * it.Pxz;
        out.B = H * it.P * H.transpose() - h_pxz.transpose() - h_pxz + it.Pzz;
    }
    out.B = symmetrize(out.B);
    out.s = pred.s_prior + 1.0;
    out.S = symmetrize(pred.S_prior + out.B);
    out.Rtilde = symmetrize(out.S / out.s);
    return out;
}

struct MixtureUpdate {
    CategoricalWeights chi;
    Vector alpha;
    Vector log_weights;  ///< tau_j + E{log mu_j}, before normalization
};

/// q(lambda) and q(mu), using the just-updated q(P) = IW(it.g, it.G) and the
/// previous sweep's Dirichlet concentration it.alpha.
inline MixtureUpdate update_mixture(const IterationState& it, const Prediction& pred,
                                    const FilterConfig& cfg) {
    const int n = static_cast<int>(it.G.rows());
    const InverseWishart q_p(it.g, it.G);
    const Matrix e_p_inv = iw_mean_of_inverse(q_p);
    const double e_logdet = iw_expected_logdet(q_p);
    const Vector e_log_mu = dirichlet_expected_log(Dirichlet(it.alpha));
    const double log2 = std::log(2.0);

    const auto M = pred.G_j.size();
    Vector log_w(static_cast<Eigen::Index>(M));
    for (std::size_t j = 0; j < M; ++j) {
        const double gj = cfg.dof_g[j];
        const double tau = 0.5 * gj * pred.logdet_G[j] -
                           0.5 * (pred.G_j[j].cwiseProduct(e_p_inv.transpose())).sum() -
                           0.5 * (gj + n + 1) * e_logdet - 0.5 * n * gj * log2 -
                           log_multivariate_gamma(n, 0.5 * gj);
        log_w[static_cast<Eigen::Index>(j)] = tau + e_log_mu[static_cast<Eigen::Index>(j)];
    }

    MixtureUpdate out{normalize_log_weights(log_w), Vector(), log_w};
    out.alpha = pred.alpha_prior + out.chi.probabilities();
    return out;
}

/// ||x_new - x_old|| / ||x_old|| <= delta, with 0/0 treated as converged.
inline bool check_convergence(const Vector& x_new, const Vector& x_old, double delta) {
    if ((x_old.array() == 0.0).all()) return (x_new.array() == 0.0).all();
    return (x_new - x_old).stableNorm() <= delta * x_old.stableNorm();
}

// ---------------------------------------------------------------------------
// Full step
// ---------------------------------------------------------------------------

struct StepDiagnostics {
    int iterations = 0;
    Matrix Ptilde;
    Matrix Rtilde;
    CategoricalWeights chi;
};

struct StepResult {
    FilterState state;
    StepDiagnostics diagnostics;
};

/// Called after every completed sweep with the sweep number (1-based).
using SweepObserver = std::function<void(int, const IterationState&)>;

inline StepResult etvbf_step(const FilterState& state, const Matrix& F, const Matrix& H,
                             const TriggerOutcome& outcome, const FilterConfig& cfg, int step = -1,
                             const SweepObserver& observer = {}) {
    try {
        const Prediction pred = predict(state, F, cfg);
        IterationState it = init_iteration(pred, cfg);

        int sweeps = 0;
        for (int i = 0; i < cfg.max_iterations; ++i) {
            const Vector x_old = it.x;

            if (outcome.transmitted()) {
                StateUpdate su = update_state_meas(it, pred.x_pred, *outcome.measurement, H);
                it.x = std::move(su.x);
                it.P = std::move(su.P);
            } else {
                JointUpdate ju = update_joint_no_meas(it, pred.x_pred, H, cfg.trigger.Y);
                it.x = std::move(ju.x);
                it.P = std::move(ju.P);
                it.Pxz = std::move(ju.Pxz);
                it.Pzz = std::move(ju.Pzz);
            }

            PredictedCovUpdate pu = update_predicted_cov(it, pred.x_pred, cfg, pred);
            it.g = pu.g;
            it.G = std::move(pu.G);
            it.Ptilde = std::move(pu.Ptilde);

            MeasCovUpdate mu = update_meas_cov(it, outcome.measurement, H, pred);
            it.s = mu.s;
            it.S = std::move(mu.S);
            it.Rtilde = std::move(mu.Rtilde);

            MixtureUpdate mx = update_mixture(it, pred, cfg);
            it.chi = std::move(mx.chi);
            it.alpha = std::move(mx.alpha);

            sweeps = i + 1;
            if (observer) observer(sweeps, it);
            if (check_convergence(it.x, x_old, cfg.delta)) break;
        }

        StepResult res;
        res.state = FilterState{it.x, it.P, it.s, it.S, it.alpha};
        res.diagnostics = StepDiagnostics{sweeps, it.Ptilde, it.Rtilde, it.chi};
        return res;
    } catch (const FilterFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw FilterFailure(step, e.what());
    }
}

/// The nominal settings of the vehicle-tracking study: five scaled-identity
/// process covariances {1, 2, 3, 9, 10} I_n with g_j = 10, s0 = 5, alpha0 = 1,
/// rho = 0.997, N = 50, R0 = r I_m, Y = y I_m.
inline FilterConfig tracking_filter_config(int n, int m, double r, double y, double rho = 0.997) {
    FilterConfig cfg;
    for (double scale : {1.0, 2.0, 3.0, 9.0, 10.0}) {
        cfg.nominal_q.push_back(scale * Matrix::Identity(n, n));
        cfg.dof_g.push_back(10.0);
    }
    cfg.alpha0 = Vector::Ones(5);
    cfg.R0 = r * Matrix::Identity(m, m);
    cfg.s0 = 5.0;
    cfg.rho = rho;
    cfg.trigger = TriggerConfig::scaled_identity(y, m);
    cfg.max_iterations = 50;
    cfg.delta = 1e-8;
    return cfg;
}

}  // namespace etvbf

#pragma once

// Comparison filters: the known-covariance event-triggered Kalman filter,
// the untriggered variational filter, and a true-covariance Kalman oracle.

#include "etvbf/filter.hpp"
#include "etvbf/numerics.hpp"
#include "etvbf/trigger.hpp"

namespace etvbf {

struct KfState {
    Vector x_hat;
    Matrix P;
};

namespace detail {

inline KfState kalman_update(const Vector& x_pred, const Matrix& P_pred, const Matrix& H, const Matrix& R,
                             const Vector& z) {
    const Matrix pht = P_pred * H.transpose();
    const SpdFactor w(symmetrize(H * pht + R));
    const Matrix K = w.solve(pht.transpose()).transpose();
    return KfState{x_pred + K * (z - H * x_pred), symmetrize(P_pred - pht * w.solve(pht.transpose()))};
}

}  // namespace detail

/// Closed-loop stochastic event-triggered KF with fixed nominal covariances.
/// A held measurement still shrinks P through the trigger's Y.
inline KfState clset_kf_step(const KfState& state, const Matrix& F, const Matrix& H, const Matrix& Qbar,
                             const Matrix& Rbar, const Matrix& Y, const TriggerOutcome& outcome) {
    const Vector x_pred = F * state.x_hat;
    const Matrix P_pred = symmetrize(F * state.P * F.transpose() + Qbar);
    if (outcome.transmitted()) return detail::kalman_update(x_pred, P_pred, H, Rbar, *outcome.measurement);

    const Matrix pht = P_pred * H.transpose();
    const SpdFactor inflated(symmetrize(H * pht + Rbar + spd_inverse(Y)));
    return KfState{x_pred, symmetrize(P_pred - pht * inflated.solve(pht.transpose()))};
}

inline KfState kf_oracle_step(const KfState& state, const Matrix& F, const Matrix& H, const Matrix& Q,
                              const Matrix& R, const Vector& z) {
    const Vector x_pred = F * state.x_hat;
    const Matrix P_pred = symmetrize(F * state.P * F.transpose() + Q);
    return detail::kalman_update(x_pred, P_pred, H, R, z);
}

/// The variational filter with every measurement delivered.
inline StepResult vbf_step(const FilterState& state, const Matrix& F, const Matrix& H, const Vector& z,
                           const FilterConfig& cfg, int step = -1) {
    return etvbf_step(state, F, H, TriggerOutcome::send(z), cfg, step);
}

}  // namespace etvbf

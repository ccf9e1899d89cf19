#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "etvbf/distributions.hpp"
#include "etvbf/numerics.hpp"

namespace etvbf {

/// Time-indexed linear-Gaussian system
///   x_k = F_k x_{k-1} + w_k,  w_k ~ N(0, Q_k)
///   z_k = H_k x_k + v_k,      v_k ~ N(0, R_k)
struct ModelSpec {
    int n = 0;
    int m = 0;
    std::function<Matrix(int)> F;
    std::function<Matrix(int)> H;
    std::function<Matrix(int)> trueQ;
    std::function<Matrix(int)> trueR;
};

struct Trajectory {
    Vector initial_state;     // x_0, deterministic
    Vector initial_estimate;  // x_{0|0} ~ N(x_0, P_{0|0})
    std::vector<Vector> states;        // x_1 .. x_K
    std::vector<Vector> measurements;  // z_1 .. z_K

    [[nodiscard]] int steps() const { return static_cast<int>(states.size()); }
};

struct ScenarioDefaults {
    Vector x0;
    Matrix P0;
    int steps = 0;
};

/// Constant-velocity vehicle in the plane: state (px, py, vx, vy), position
/// measurements, cosine-modulated true noise with period 2 T_f.
inline ModelSpec build_cv_scenario(double T, int T_f) {
    if (!(T > 0.0)) throw std::invalid_argument("build_cv_scenario: T must be positive");
    if (T_f <= 0) throw std::invalid_argument("build_cv_scenario: T_f must be positive");

    Matrix F = Matrix::Identity(4, 4);
    F(0, 2) = T;
    F(1, 3) = T;

    Matrix H = Matrix::Zero(2, 4);
    H(0, 0) = 1.0;
    H(1, 1) = 1.0;

    Matrix q_shape = Matrix::Zero(4, 4);
    for (int i = 0; i < 2; ++i) {
        q_shape(i, i) = T * T * T / 3.0;
        q_shape(i, i + 2) = T * T / 2.0;
        q_shape(i + 2, i) = T * T / 2.0;
        q_shape(i + 2, i + 2) = T;
    }
    Matrix r_shape(2, 2);
    r_shape << 1.0, 0.5, 0.5, 1.0;

    const double tf = static_cast<double>(T_f);
    ModelSpec spec;
    spec.n = 4;
    spec.m = 2;
    spec.F = [F](int) { return F; };
    spec.H = [H](int) { return H; };
    spec.trueQ = [q_shape, tf](int k) -> Matrix {
        return (6.0 + 0.5 * std::cos(std::numbers::pi * k / tf)) * q_shape;
    };
    spec.trueR = [r_shape, tf](int k) -> Matrix {
        return (100.0 + 50.0 * std::cos(std::numbers::pi * k / tf)) * r_shape;
    };
    return spec;
}

inline ScenarioDefaults scenario_defaults() {
    ScenarioDefaults d;
    d.x0 = Vector(4);
    d.x0 << 100.0, 100.0, 10.0, 10.0;
    d.P0 = 100.0 * Matrix::Identity(4, 4);
    d.steps = 150;
    return d;
}

/// Truth starts at x0; the estimator's initial estimate is drawn first from
/// N(x0, P0), then for k = 1..steps the process and measurement noise at
/// step k (covariances evaluated at k).
inline Trajectory simulate_truth(const ModelSpec& model, const Vector& x0, const Matrix& P0,
                                 int steps, SeededRng& rng) {
    if (x0.size() != model.n || P0.rows() != model.n || P0.cols() != model.n) {
        throw std::invalid_argument("simulate_truth: dimension mismatch");
    }
    if (steps < 1) throw std::invalid_argument("simulate_truth: steps must be >= 1");

    Trajectory traj;
    traj.initial_state = x0;
    traj.initial_estimate = sample_gaussian(rng, x0, P0);
    traj.states.reserve(static_cast<std::size_t>(steps));
    traj.measurements.reserve(static_cast<std::size_t>(steps));

    const Vector zero_n = Vector::Zero(model.n);
    const Vector zero_m = Vector::Zero(model.m);
    Vector x = x0;
    for (int k = 1; k <= steps; ++k) {
        x = model.F(k) * x + sample_gaussian(rng, zero_n, model.trueQ(k));
        Vector z = model.H(k) * x + sample_gaussian(rng, zero_m, model.trueR(k));
        traj.states.push_back(x);
        traj.measurements.push_back(std::move(z));
    }
    return traj;
}

/// Debug dump: k, x1..xn, z1..zm. Row k = 0 carries x_0 with empty z columns.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const auto n = traj.initial_state.size();
    const auto m = traj.measurements.empty() ? 0 : traj.measurements.front().size();
    os << "k";
    for (Eigen::Index i = 0; i < n; ++i) os << ",x" << (i + 1);
    for (Eigen::Index i = 0; i < m; ++i) os << ",z" << (i + 1);
    os << '\n';
    os.precision(17);
    os << 0;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.initial_state[i];
    for (Eigen::Index i = 0; i < m; ++i) os << ',';
    os << '\n';
    for (int k = 0; k < traj.steps(); ++k) {
        os << (k + 1);
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << traj.states[static_cast<std::size_t>(k)][i];
        for (Eigen::Index i = 0; i < m; ++i) {
            os << ',' << traj.measurements[static_cast<std::size_t>(k)][i];
        }
        os << '\n';
    }
}

}  // namespace etvbf

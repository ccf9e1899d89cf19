#pragma once

// Closed-loop stochastic event trigger. The sensor keeps its measurement
// (gamma = 0) with probability exp(-1/2 e' Y e), e the innovation against the
// estimator's fed-back prediction.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "etvbf/distributions.hpp"
#include "etvbf/numerics.hpp"

namespace etvbf {

struct TriggerConfig {
    Matrix Y;

    explicit TriggerConfig(Matrix y) : Y(std::move(y)) {
        (void)spd_factor(Y);  // Y must be SPD
    }

    static TriggerConfig scaled_identity(double y, int m) {
        return TriggerConfig(y * Matrix::Identity(m, m));
    }
};

/// gamma = 1 iff a measurement is attached.
struct TriggerOutcome {
    std::optional<Vector> measurement;

    [[nodiscard]] bool transmitted() const { return measurement.has_value(); }
    [[nodiscard]] int gamma() const { return transmitted() ? 1 : 0; }

    static TriggerOutcome send(Vector z) { return TriggerOutcome{std::move(z)}; }
    static TriggerOutcome hold() { return TriggerOutcome{std::nullopt}; }
};

/// P(gamma = 0 | e) = exp(-1/2 e' Y e).
inline double trigger_probability(const Vector& e, const TriggerConfig& cfg) {
    if (e.size() != cfg.Y.rows()) throw std::invalid_argument("trigger_probability: dimension mismatch");
    return std::exp(-0.5 * e.dot(cfg.Y * e));
}

inline TriggerOutcome sensor_decide(const Vector& z, const Vector& z_pred, const TriggerConfig& cfg,
                                    SeededRng& rng) {
    const double zeta = sample_uniform(rng);
    if (zeta <= trigger_probability(z - z_pred, cfg)) return TriggerOutcome::hold();
    return TriggerOutcome::send(z);
}

}  // namespace etvbf

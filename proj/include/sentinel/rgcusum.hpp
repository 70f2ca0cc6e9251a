#pragma once

#include "sentinel/model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sentinel {

/// Admissible magnitude band rho_L <= |mu_m| <= rho_U for attacked residual entries.
class AttackBounds {
public:
    AttackBounds(double rho_l, double rho_u);

    double rho_l() const noexcept { return rho_l_; }
    double rho_u() const noexcept { return rho_u_; }

private:
    double rho_l_;
    double rho_u_;
};

/**
 * Per-meter relaxed log-likelihood ratio: the supremum of
 * (2 mu x - mu^2) / (2 sigma2) over rho_L <= |mu| <= rho_U.
 *
 * Closed form with three branches keyed on |x| against the band; continuous
 * at both breakpoints.
 */
double zeta(double x_tilde_m, const AttackBounds& bounds, double sigma2);

/// Sum over meters of max{zeta_m, 0}, accumulated in meter order.
double rgcusum_increment(const Residual& r, const AttackBounds& bounds, double sigma2);

struct RgcusumState {
    double omega = 0.0;
    std::size_t k = 0;
    double h = 0.0;
    bool alarmed = false;
    std::optional<double> overshoot;

    static RgcusumState initial(double h);
};

// Applies one observation; throws SteppedAfterAlarm once the state has alarmed.
// There is no reset: start a fresh state for a new test.
RgcusumState step(const RgcusumState& state, const Residual& r, const AttackBounds& bounds,
                  double sigma2);

// Same recursion with a precomputed increment.
RgcusumState step_increment(const RgcusumState& state, double increment);

struct StoppingReport {
    std::size_t t_alarm = 0;        // T_R when alarmed, else number of samples consumed
    double omega_final = 0.0;
    std::optional<double> overshoot;
    bool censored = false;          // stream ended before the threshold was reached
    std::vector<double> omega_trace;
};

/**
 * Runs the relaxed GCUSUM over raw observations until omega >= h.
 *
 * Observations are projected with `proj` first, so the result depends on x
 * only through its residual. A stream that ends without alarm yields a
 * censored report rather than an error.
 */
StoppingReport run_rgcusum(std::span<const Vector> stream, const LinearModel& model,
                           const Projector& proj, const AttackBounds& bounds, double h);

}  // namespace sentinel

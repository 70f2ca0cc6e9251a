#pragma once

#include "sentinel/model.hpp"
#include "sentinel/rgcusum.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace sentinel {

double erf(double x);
double erfc(double x);

// Upper bound on the pre-attack mean of max{zeta_m, 0}:
//   ||p_m||^2 / 2 + (rho_L + rho_U) / sigma * ||p_m|| * sqrt(2 / pi)
double lemma1_upper(double row_norm, const AttackBounds& bounds, double sigma2);
double lemma1_upper(std::size_t m, const Projector& proj, const AttackBounds& bounds,
                    double sigma2);

// Lower bound on the post-attack mean of max{zeta_m, 0}:
//   rho_L^2 / (2 sigma2) * [erf(2 rho_U / s) - erf((rho_L + rho_U) / s)],  s = sqrt(2) sigma ||p_m||
// evaluated as erfc((rho_L + rho_U) / s) - erfc(2 rho_U / s). Zero when ||p_m|| = 0.
double lemma1_lower(double row_norm, const AttackBounds& bounds, double sigma2);
double lemma1_lower(std::size_t m, const Projector& proj, const AttackBounds& bounds,
                    double sigma2);

/// Smallest threshold that guarantees a no-attack mean run length of at least gamma.
double threshold_floor(const LinearModel& model, const Projector& proj,
                       const AttackBounds& bounds, double gamma);

// Denominators at or below this are treated as zero by delay_ceiling.
inline constexpr double kVacuousDenominator = 1e-300;

struct DelayCeiling {
    double value = 0.0;  // +infinity when vacuous
    bool vacuous = false;
    double denominator = 0.0;
};

/// Approximate worst-case detection delay ceiling h / sum_m lemma1_lower(m) (overshoot ignored).
DelayCeiling delay_ceiling(double h, const LinearModel& model, const Projector& proj,
                           const AttackBounds& bounds);

struct BoundsReport {
    std::optional<double> gamma;
    double h_floor = 0.0;  // only meaningful when gamma is set
    double threshold = 0.0;
    DelayCeiling ceiling;
    std::vector<double> per_meter_upper;
    std::vector<double> per_meter_lower;
};

// When gamma is given, the threshold defaults to h_floor(gamma); otherwise h must be given.
BoundsReport compute_bounds(const LinearModel& model, const Projector& proj,
                            const AttackBounds& bounds, std::optional<double> gamma,
                            std::optional<double> h);

}  // namespace sentinel

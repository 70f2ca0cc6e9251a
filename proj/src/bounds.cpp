#include "sentinel/bounds.hpp"

#include "sentinel/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace sentinel {

// glibc's erf/erfc are accurate to a few ulp and switch to a complementary
// expansion for large arguments, which is what the lower bound needs.
double erf(double x) { return std::erf(x); }
double erfc(double x) { return std::erfc(x); }

double lemma1_upper(double row_norm, const AttackBounds& bounds, double sigma2) {
    if (row_norm <= 0.0) return 0.0;
    const double sigma = std::sqrt(sigma2);
    return 0.5 * row_norm * row_norm + (bounds.rho_l() + bounds.rho_u()) / sigma * row_norm *
                                           std::sqrt(2.0 / std::numbers::pi);
}

double lemma1_upper(std::size_t m, const Projector& proj, const AttackBounds& bounds,
                    double sigma2) {
    return lemma1_upper(proj.row_norms()[static_cast<Eigen::Index>(m)], bounds, sigma2);
}

double lemma1_lower(double row_norm, const AttackBounds& bounds, double sigma2) {
    if (row_norm <= 0.0) return 0.0;
    const double s = std::numbers::sqrt2 * std::sqrt(sigma2) * row_norm;
    const double rl = bounds.rho_l();
    const double ru = bounds.rho_u();
    const double a = (rl + ru) / s;
    const double b = 2.0 * ru / s;
    // erf(b) - erf(a) == erfc(a) - erfc(b); b >= a so the difference is >= 0.
    const double diff = erfc(a) - erfc(b);
    return rl * rl / (2.0 * sigma2) * (diff > 0.0 ? diff : 0.0);
}

double lemma1_lower(std::size_t m, const Projector& proj, const AttackBounds& bounds,
                    double sigma2) {
    return lemma1_lower(proj.row_norms()[static_cast<Eigen::Index>(m)], bounds, sigma2);
}

double threshold_floor(const LinearModel& model, const Projector& proj,
                       const AttackBounds& bounds, double gamma) {
    if (!(gamma >= 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be >= 1");
    double sum = 0.0;
    for (std::size_t m = 0; m < proj.M(); ++m) sum += lemma1_upper(m, proj, bounds, model.sigma2());
    return gamma * sum;
}

DelayCeiling delay_ceiling(double h, const LinearModel& model, const Projector& proj,
                           const AttackBounds& bounds) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
    DelayCeiling out;
    for (std::size_t m = 0; m < proj.M(); ++m) {
        out.denominator += lemma1_lower(m, proj, bounds, model.sigma2());
    }
    if (out.denominator <= kVacuousDenominator) {
        out.vacuous = true;
        out.value = std::numeric_limits<double>::infinity();
    } else {
        out.value = h / out.denominator;
    }
    return out;
}

BoundsReport compute_bounds(const LinearModel& model, const Projector& proj,
                            const AttackBounds& bounds, std::optional<double> gamma,
                            std::optional<double> h) {
    BoundsReport r;
    r.gamma = gamma;
    for (std::size_t m = 0; m < proj.M(); ++m) {
        r.per_meter_upper.push_back(lemma1_upper(m, proj, bounds, model.sigma2()));
        r.per_meter_lower.push_back(lemma1_lower(m, proj, bounds, model.sigma2()));
    }
    if (gamma) r.h_floor = threshold_floor(model, proj, bounds, *gamma);
    if (h) {
        r.threshold = *h;
    } else if (gamma) {
        r.threshold = r.h_floor;
    } else {
        throw Error(ErrorCode::InvalidArgument, "either gamma or a threshold is required");
    }
    r.ceiling = delay_ceiling(r.threshold, model, proj, bounds);
    return r;
}

}  // namespace sentinel

#include "sentinel/rgcusum.hpp"

#include "sentinel/error.hpp"

#include <cmath>
#include <sstream>

namespace sentinel {

AttackBounds::AttackBounds(double rho_l, double rho_u) : rho_l_(rho_l), rho_u_(rho_u) {
    if (!(rho_l > 0.0) || !(rho_l <= rho_u) || !std::isfinite(rho_u)) {
        std::ostringstream os;
        os << "attack bounds must satisfy 0 < rho_L <= rho_U, got [" << rho_l << ", " << rho_u
           << "]";
        throw Error(ErrorCode::InvalidArgument, os.str());
    }
}

double zeta(double x_tilde_m, const AttackBounds& bounds, double sigma2) {
    const double ax = std::abs(x_tilde_m);
    const double lo = bounds.rho_l();
    const double hi = bounds.rho_u();
    double num;
    if (ax < lo) {
        num = 2.0 * ax * lo - lo * lo;
    } else if (ax > hi) {
        num = 2.0 * ax * hi - hi * hi;
    } else {
        num = ax * ax;
    }
    return num / (2.0 * sigma2);
}

double rgcusum_increment(const Residual& r, const AttackBounds& bounds, double sigma2) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < r.x_tilde.size(); ++m) {
        const double z = zeta(r.x_tilde[m], bounds, sigma2);
        sum += z > 0.0 ? z : 0.0;
    }
    return sum;
}

RgcusumState RgcusumState::initial(double h) {
    if (!(h >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be nonnegative");
    RgcusumState s;
    s.h = h;
    return s;
}

RgcusumState step_increment(const RgcusumState& state, double increment) {
    if (state.alarmed) {
        throw Error(ErrorCode::SteppedAfterAlarm, "RGCUSUM state already alarmed");
    }
    RgcusumState next = state;
    next.omega = state.omega + increment;
    next.k = state.k + 1;
    if (next.omega >= next.h) {
        next.alarmed = true;
        next.overshoot = next.omega - next.h;
    }
    return next;
}

RgcusumState step(const RgcusumState& state, const Residual& r, const AttackBounds& bounds,
                  double sigma2) {
    return step_increment(state, rgcusum_increment(r, bounds, sigma2));
}

StoppingReport run_rgcusum(std::span<const Vector> stream, const LinearModel& model,
                           const Projector& proj, const AttackBounds& bounds, double h) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
    StoppingReport report;
    auto state = RgcusumState::initial(h);
    for (const Vector& x : stream) {
        state = step(state, residual(proj, x), bounds, model.sigma2());
        report.omega_trace.push_back(state.omega);
        if (state.alarmed) break;
    }
    report.t_alarm = state.k;
    report.omega_final = state.omega;
    report.overshoot = state.overshoot;
    report.censored = !state.alarmed;
    return report;
}

}  // namespace sentinel

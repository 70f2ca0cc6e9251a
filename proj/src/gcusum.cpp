#include "sentinel/gcusum.hpp"

#include "sentinel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sentinel {
namespace {

Matrix null_basis_of_transpose(const Matrix& HA) {
    const Eigen::Index rows = HA.rows();
    Eigen::JacobiSVD<Matrix> svd(HA, Eigen::ComputeFullU);
    const Vector& s = svd.singularValues();
    const double smax = s.size() > 0 ? s.maxCoeff() : 0.0;
    const double tol =
        smax * static_cast<double>(std::max(HA.rows(), HA.cols())) *
        std::numeric_limits<double>::epsilon();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > tol) ++rank;
    }
    return svd.matrixU().rightCols(rows - rank);
}

Matrix rows_of(const Matrix& H, const std::vector<std::size_t>& support) {
    Matrix out(static_cast<Eigen::Index>(support.size()), H.cols());
    for (std::size_t i = 0; i < support.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = H.row(static_cast<Eigen::Index>(support[i]));
    }
    return out;
}

struct DykstraOutcome {
    ProjectionStatus status = ProjectionStatus::Infeasible;
    Vector mu_a;
    std::size_t iterations = 0;
};

// Box for coordinate i is s_i * mu_i in [lo, hi].
inline double clamp_signed(double v, int sign, double lo, double hi) {
    const double t = std::clamp(sign * v, lo, hi);
    return sign * t;
}

DykstraOutcome dykstra(const Vector& y, const Matrix& Z, const std::vector<int>& signs,
                       const AttackBounds& bounds, const DykstraOptions& opt) {
    DykstraOutcome out;
    const Eigen::Index n = y.size();
    if (Z.cols() == 0) {
        // Subspace is {0}, which the box excludes since rho_L > 0.
        return out;
    }
    const double scale = std::max(1.0, bounds.rho_u());
    const double tol = opt.tolerance * scale;
    const double feas_tol = opt.feasibility_tolerance * scale;
    const double lo = bounds.rho_l();
    const double hi = bounds.rho_u();

    auto project_box = [&](const Vector& v) {
        Vector r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            r[i] = clamp_signed(v[i], signs[static_cast<std::size_t>(i)], lo, hi);
        }
        return r;
    };
    auto project_subspace = [&](const Vector& v) -> Vector { return Z * (Z.transpose() * v); };

    // w orthogonal to the subspace with w.b > 0 for every box point proves the sets are disjoint.
    auto separates = [&](const Vector& w) {
        double min_dot = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = w[i] * signs[static_cast<std::size_t>(i)];
            min_dot += std::min(c * lo, c * hi);
        }
        return min_dot > 1e-12 * w.norm() * hi * static_cast<double>(n);
    };

    Vector x = y;
    Vector p = Vector::Zero(n);
    Vector q = Vector::Zero(n);
    Vector u = project_box(x);
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        const Vector u_next = project_box(x + p);
        p = x + p - u_next;
        const Vector x_next = project_subspace(u_next + q);
        q = u_next + q - x_next;

        const double move = std::max((x_next - x).cwiseAbs().maxCoeff(),
                                     (u_next - u).cwiseAbs().maxCoeff());
        x = x_next;
        u = u_next;
        out.iterations = it;
        const double gap = (x - u).cwiseAbs().maxCoeff();
        if (gap > feas_tol) {
            // A small step alone does not decide emptiness: convergence can be slow.
            if (separates(u - project_subspace(u))) return out;
            continue;
        }
        if (move <= tol) {
            out.status = ProjectionStatus::Feasible;
            // Subspace iterate: exact in R^perp(H), box violation bounded by the gap.
            out.mu_a = x;
            return out;
        }
    }
    out.status = ProjectionStatus::NoConvergence;
    return out;
}

// Upper bound on the pattern's objective from the box alone (subspace dropped).
double sign_box_bound(const Vector& y, const std::vector<int>& signs, const AttackBounds& b) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mu = clamp_signed(y[i], signs[static_cast<std::size_t>(i)], b.rho_l(),
                                       b.rho_u());
        total += 2.0 * mu * y[i] - mu * mu;
    }
    return total;
}

void check_residual(const Residual& x_tilde, const LinearModel& model) {
    if (x_tilde.size() != model.M()) {
        std::ostringstream os;
        os << "residual has " << x_tilde.size() << " entries, model expects " << model.M();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

}  // namespace

FeasibleProjection project_feasible_detailed(const Residual& x_tilde, const LinearModel& model,
                                             const SupportPattern& pattern,
                                             const AttackBounds& bounds,
                                             const DykstraOptions& options) {
    check_residual(x_tilde, model);
    if (pattern.support.empty() || pattern.support.size() != pattern.signs.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "support pattern must be nonempty with one sign per index");
    }
    for (std::size_t i = 0; i < pattern.support.size(); ++i) {
        if (pattern.support[i] >= model.M()) {
            throw Error(ErrorCode::InvalidArgument, "support index out of range");
        }
        if (i > 0 && pattern.support[i] <= pattern.support[i - 1]) {
            throw Error(ErrorCode::InvalidArgument, "support indices must be strictly ascending");
        }
        if (pattern.signs[i] != 1 && pattern.signs[i] != -1) {
            throw Error(ErrorCode::InvalidArgument, "signs must be +1 or -1");
        }
    }

    const Matrix Z = null_basis_of_transpose(rows_of(model.H(), pattern.support));
    Vector y(static_cast<Eigen::Index>(pattern.support.size()));
    for (std::size_t i = 0; i < pattern.support.size(); ++i) {
        y[static_cast<Eigen::Index>(i)] = x_tilde[pattern.support[i]];
    }
    const DykstraOutcome d = dykstra(y, Z, pattern.signs, bounds, options);

    FeasibleProjection out;
    out.status = d.status;
    out.iterations = d.iterations;
    if (d.status == ProjectionStatus::Feasible) {
        out.mu = Vector::Zero(static_cast<Eigen::Index>(model.M()));
        for (std::size_t i = 0; i < pattern.support.size(); ++i) {
            out.mu[static_cast<Eigen::Index>(pattern.support[i])] =
                d.mu_a[static_cast<Eigen::Index>(i)];
        }
    }
    return out;
}

std::optional<Vector> project_feasible(const Residual& x_tilde, const LinearModel& model,
                                       const SupportPattern& pattern, const AttackBounds& bounds,
                                       const DykstraOptions& options) {
    FeasibleProjection r = project_feasible_detailed(x_tilde, model, pattern, bounds, options);
    if (r.status != ProjectionStatus::Feasible) return std::nullopt;
    return std::move(r.mu);
}

GcusumEvaluator::GcusumEvaluator(const LinearModel& model, AttackBounds bounds,
                                 std::size_t max_meters, DykstraOptions options)
    : model_(model), bounds_(bounds), options_(options) {
    const std::size_t M = model_.M();
    if (M > max_meters || M > 30) {
        std::ostringstream os;
        os << "GCUSUM enumeration refused: M = " << M << " exceeds guard " << max_meters;
        throw Error(ErrorCode::TooLarge, os.str());
    }
    const std::uint32_t full = (std::uint32_t{1} << M) - 1;
    subsets_.reserve(full);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        SubsetBasis sb;
        sb.mask = mask;
        for (std::size_t m = 0; m < M; ++m) {
            if (mask & (std::uint32_t{1} << m)) sb.support.push_back(m);
        }
        sb.basis = null_basis_of_transpose(rows_of(model_.H(), sb.support));
        subsets_.push_back(std::move(sb));
    }
}

VStatResult GcusumEvaluator::evaluate(const Residual& x_tilde) const {
    check_residual(x_tilde, model_);
    VStatResult result;
    const double two_sigma2 = 2.0 * model_.sigma2();
    double best = -std::numeric_limits<double>::infinity();
    bool any_feasible = false;

    for (const SubsetBasis& sb : subsets_) {
        if (sb.basis.cols() == 0) continue;
        const std::size_t n = sb.support.size();
        Vector y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = x_tilde[sb.support[i]];
        const double y_norm2 = y.squaredNorm();

        std::vector<int> signs(n);
        for (std::uint32_t sm = 0; sm < (std::uint32_t{1} << n); ++sm) {
            for (std::size_t i = 0; i < n; ++i) signs[i] = (sm >> i) & 1U ? -1 : 1;
            // The box-only objective bounds this pattern from above; skip patterns that
            // cannot beat the incumbent. Feasibility of skipped patterns is irrelevant
            // once some feasible pattern is known.
            if (any_feasible && sign_box_bound(y, signs, bounds_) / two_sigma2 <= best) continue;

            ++result.patterns_evaluated;
            const DykstraOutcome d = dykstra(y, sb.basis, signs, bounds_, options_);
            if (d.status == ProjectionStatus::NoConvergence) {
                ++result.no_convergence;
                continue;
            }
            if (d.status != ProjectionStatus::Feasible) continue;
            const double objective = (y_norm2 - (d.mu_a - y).squaredNorm()) / two_sigma2;
            if (!any_feasible || objective > best) {
                any_feasible = true;
                best = objective;
                result.argmax = SupportPattern{sb.support, signs};
                Vector mu = Vector::Zero(static_cast<Eigen::Index>(model_.M()));
                for (std::size_t i = 0; i < n; ++i) {
                    mu[static_cast<Eigen::Index>(sb.support[i])] = d.mu_a[static_cast<Eigen::Index>(i)];
                }
                result.mu = std::move(mu);
            }
        }
    }

    if (any_feasible) {
        result.value = best;
    } else {
        const double rl = bounds_.rho_l();
        result.value = -x_tilde.x_tilde.squaredNorm() / two_sigma2 - rl * rl / two_sigma2;
        result.sentinel = true;
    }
    return result;
}

double v_stat(const Residual& x_tilde, const LinearModel& model, const AttackBounds& bounds,
              std::size_t max_meters) {
    return GcusumEvaluator(model, bounds, max_meters).evaluate(x_tilde).value;
}

GcusumState GcusumState::initial(double h) {
    if (!(h >= 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be nonnegative");
    GcusumState s;
    s.h = h;
    return s;
}

GcusumState step_g(const GcusumState& state, double v_t) {
    if (state.alarmed) throw Error(ErrorCode::SteppedAfterAlarm, "GCUSUM state already alarmed");
    GcusumState next = state;
    next.V = std::max(state.V, 0.0) + v_t;
    next.k = state.k + 1;
    next.alarmed = next.V >= next.h;
    return next;
}

GcusumReport run_gcusum(std::span<const Vector> stream, const GcusumEvaluator& evaluator,
                        const Projector& proj, double h) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be positive");
    GcusumReport report;
    auto state = GcusumState::initial(h);
    for (const Vector& x : stream) {
        VStatResult v = evaluator.evaluate(residual(proj, x));
        state = step_g(state, v.value);
        report.V_trace.push_back(state.V);
        report.per_step.push_back(std::move(v));
        if (state.alarmed) break;
    }
    report.t_alarm = state.k;
    report.V_final = state.V;
    report.censored = !state.alarmed;
    return report;
}

}  // namespace sentinel

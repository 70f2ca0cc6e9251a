#pragma once

#include "sentinel/model.hpp"
#include "sentinel/rgcusum.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sentinel {

/// Candidate support A of the residual-space attack plus the sign of mu_m on it.
struct SupportPattern {
    std::vector<std::size_t> support;  // 0-based meter indices, ascending
    std::vector<int> signs;            // +1 / -1, parallel to support

    bool operator==(const SupportPattern&) const = default;
};

struct DykstraOptions {
    double tolerance = 1e-8;              // max iterate movement at convergence (scaled by max(1, rho_U))
    std::size_t max_iterations = 10000;
    double feasibility_tolerance = 1e-6;  // allowed gap between the two iterates (same scaling)
};

enum class ProjectionStatus { Feasible, Infeasible, NoConvergence };

struct FeasibleProjection {
    ProjectionStatus status = ProjectionStatus::Infeasible;
    Vector mu;  // full length M, zero off the support; valid when Feasible
    std::size_t iterations = 0;
};

/**
 * Euclidean projection of x~ onto
 *   C = { mu in R^perp(H) : mu_m = 0 off A, rho_L <= s_m mu_m <= rho_U on A }.
 *
 * Fixing the signs makes C the intersection of a linear subspace and a box, so
 * Dykstra's alternating projections converge to the projection when C is
 * nonempty. An empty C shows up as a persistent gap between the iterates.
 */
FeasibleProjection project_feasible_detailed(const Residual& x_tilde, const LinearModel& model,
                                             const SupportPattern& pattern,
                                             const AttackBounds& bounds,
                                             const DykstraOptions& options = {});

// Absent when C is empty (or the solver hit its iteration cap).
std::optional<Vector> project_feasible(const Residual& x_tilde, const LinearModel& model,
                                       const SupportPattern& pattern, const AttackBounds& bounds,
                                       const DykstraOptions& options = {});

struct VStatResult {
    double value = 0.0;
    std::optional<SupportPattern> argmax;
    std::optional<Vector> mu;
    bool sentinel = false;  // no support/sign pattern admitted a feasible mu
    std::size_t patterns_evaluated = 0;
    std::size_t no_convergence = 0;
};

inline constexpr std::size_t kDefaultEnumerationGuard = 12;

/**
 * Exhaustive GLR statistic v_t for one residual.
 *
 * Per-support subspace bases are computed once at construction, so reuse an
 * instance across time steps. Work grows as 3^M; construction throws TooLarge
 * when M exceeds the guard.
 */
class GcusumEvaluator {
public:
    GcusumEvaluator(const LinearModel& model, AttackBounds bounds,
                    std::size_t max_meters = kDefaultEnumerationGuard,
                    DykstraOptions options = {});

    VStatResult evaluate(const Residual& x_tilde) const;

    const LinearModel& model() const noexcept { return model_; }
    const AttackBounds& bounds() const noexcept { return bounds_; }

private:
    struct SubsetBasis {
        std::uint32_t mask = 0;
        std::vector<std::size_t> support;
        Matrix basis;  // |A| x d orthonormal basis of null(H_A^T); d may be 0
    };

    LinearModel model_;
    AttackBounds bounds_;
    DykstraOptions options_;
    std::vector<SubsetBasis> subsets_;
};

double v_stat(const Residual& x_tilde, const LinearModel& model, const AttackBounds& bounds,
              std::size_t max_meters = kDefaultEnumerationGuard);

struct GcusumState {
    double V = 0.0;
    std::size_t k = 0;
    double h = 0.0;
    bool alarmed = false;

    static GcusumState initial(double h);
};

// V_K = max{V_{K-1}, 0} + v_K; alarm once V_K >= h.
GcusumState step_g(const GcusumState& state, double v_t);

struct GcusumReport {
    std::size_t t_alarm = 0;
    double V_final = 0.0;
    bool censored = false;
    std::vector<double> V_trace;
    std::vector<VStatResult> per_step;
};

GcusumReport run_gcusum(std::span<const Vector> stream, const GcusumEvaluator& evaluator,
                        const Projector& proj, double h);

}  // namespace sentinel

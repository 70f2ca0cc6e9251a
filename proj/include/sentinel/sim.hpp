#pragma once

#include "sentinel/gcusum.hpp"
#include "sentinel/model.hpp"
#include "sentinel/rgcusum.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sentinel::sim {

using Rng = std::mt19937_64;

inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

enum class AttackKind { None, Constant, Cyclic, Custom };

/**
 * Injected false data. Attack-relative index r = t - onset + 1 selects b^(r):
 *   constant: b^(r) = a
 *   cyclic:   b^(r) = v[(r - 1) mod L] * (1 + r * growth)
 *   custom:   b^(r) = generator(r)
 * With project_to_complement the injected vector is P b^(r), which changes
 * nothing the detectors see but keeps the raw observations free of the
 * undetectable H c component.
 */
struct AttackSpec {
    AttackKind kind = AttackKind::None;
    std::vector<Vector> vectors;
    double growth = 0.0;
    std::function<Vector(std::size_t)> generator;
    std::size_t onset = kNever;
    bool project_to_complement = false;

    static AttackSpec none();
    static AttackSpec constant(Vector a, std::size_t onset = 1);
    static AttackSpec cyclic(std::vector<Vector> vectors, double growth, std::size_t onset = 1);
    static AttackSpec custom(std::function<Vector(std::size_t)> generator, std::size_t onset = 1);

    bool active_at(std::size_t t) const noexcept;
    // b^(r) for attack-relative index r >= 1, before any projection.
    Vector relative(std::size_t r) const;
};

struct AttackValidation {
    std::vector<std::string> warnings;
    // 1-based meters where the detectable component is zero, per cycle vector.
    std::vector<std::vector<std::size_t>> zero_sets;
};

// Checks vector lengths (DimensionMismatch) and whether P a respects the band on its support.
AttackValidation validate_attack(const AttackSpec& attack, const Projector& proj,
                                 const AttackBounds& bounds);

enum class DetectorKind { Rgcusum, Gcusum };

using ThetaSource = std::function<Vector(std::size_t)>;

struct ScenarioConfig {
    ScenarioConfig(LinearModel model, AttackBounds bounds);

    LinearModel model;
    AttackBounds bounds;
    ThetaSource theta;  // empty means theta = 0
    AttackSpec attack;
    std::size_t horizon = 10000;
    std::uint64_t base_seed = 1;
    std::size_t runs = 300;
    DetectorKind detector = DetectorKind::Rgcusum;
    std::size_t gcusum_guard = kDefaultEnumerationGuard;
};

// Counter-based seed for run `run_index`: splitmix64(base_seed + splitmix64(run_index)).
std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run_index);

/// x = H theta + attack + n with n ~ N(0, sigma2 I) drawn from `rng`.
Vector generate_observation(const LinearModel& model, const Vector& theta, const Vector* attack,
                            Rng& rng);

struct RunRecord {
    std::size_t stop_time = 0;  // alarm time, or the horizon when censored
    double statistic = 0.0;     // detector statistic at stop_time
    double overshoot = 0.0;     // statistic - h; 0 when censored
    bool censored = false;
};

struct RunStats {
    double h = 0.0;
    std::vector<RunRecord> runs;
    double mean_stop = 0.0;       // censored runs enter at the horizon (a lower bound)
    double stderr_stop = 0.0;
    double censored_fraction = 0.0;
    double mean_delay = 0.0;      // (T - onset + 1)^+; equals mean_stop for onset 1
    double stderr_delay = 0.0;
    double mean_overshoot = 0.0;  // over uncensored runs
    double mean_overshoot_ratio = 0.0;
    std::vector<std::string> warnings;
};

// Aggregates per-run records; deterministic in the record order only.
RunStats summarize(double h, std::vector<RunRecord> runs, std::size_t onset);

double pairwise_sum(std::span<const double> values);

/// Mean run length to false alarm under no attack.
RunStats estimate_arl(const ScenarioConfig& scenario, double h);

/// Detection delay with the scenario's attack; onset 1 gives the worst case for RGCUSUM.
RunStats estimate_edd(const ScenarioConfig& scenario, double h);

struct CurvePoint {
    double h = 0.0;
    RunStats arl;
    RunStats edd;
};

/**
 * ARL and EDD over an ascending threshold grid. Every threshold sees the same
 * sample paths (one pass per run records the first crossing of each h), so
 * the ARL and EDD columns are nondecreasing in h for a fixed seed set.
 */
std::vector<CurvePoint> curve_sweep(const ScenarioConfig& scenario, std::span<const double> h_grid);

// Same sample paths for every h; one stats block per threshold.
std::vector<RunStats> simulate_thresholds(const ScenarioConfig& scenario,
                                          std::span<const double> h_grid);

/// Per-step zeta_m values of one seeded run (rows = time), for invariance checks.
std::vector<Vector> zeta_trace(const ScenarioConfig& scenario, std::size_t run_index,
                               std::size_t steps);

struct PairedStops {
    RunRecord rgcusum;
    RunRecord gcusum;
};

// Runs both detectors on one shared sample path.
PairedStops simulate_paired(const ScenarioConfig& scenario, double h, std::size_t run_index);

// Worker count: CUSUM_SENTINEL_THREADS if set, else hardware concurrency.
std::size_t worker_count(std::size_t jobs);

inline constexpr double kArlHorizonFactor = 50.0;
inline constexpr double kCensoringWarnFraction = 0.05;

}  // namespace sentinel::sim

#include "sentinel/sim.hpp"

#include "sentinel/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace sentinel::sim {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void check_length(const Vector& v, std::size_t M, const char* what) {
    if (static_cast<std::size_t>(v.size()) != M) {
        std::ostringstream os;
        os << what << " has " << v.size() << " entries, model expects " << M;
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
}

// One seeded sample path; produces residuals for t = 1, 2, ...
class PathGenerator {
public:
    PathGenerator(const ScenarioConfig& s, const Projector& proj, bool with_attack,
                  std::size_t run_index)
        : s_(s), proj_(proj), with_attack_(with_attack && s.attack.kind != AttackKind::None),
          rng_(run_seed(s.base_seed, run_index)),
          zero_theta_(Vector::Zero(static_cast<Eigen::Index>(s.model.N()))) {}

    Residual next() {
        ++t_;
        const Vector theta = s_.theta ? s_.theta(t_) : zero_theta_;
        if (with_attack_ && s_.attack.active_at(t_)) {
            Vector a = s_.attack.relative(t_ - s_.attack.onset + 1);
            check_length(a, s_.model.M(), "attack vector");
            if (s_.attack.project_to_complement) a = proj_.P() * a;
            return Residual{proj_.P() * generate_observation(s_.model, theta, &a, rng_)};
        }
        return Residual{proj_.P() * generate_observation(s_.model, theta, nullptr, rng_)};
    }

    std::size_t t() const noexcept { return t_; }

private:
    const ScenarioConfig& s_;
    const Projector& proj_;
    bool with_attack_;
    Rng rng_;
    Vector zero_theta_;
    std::size_t t_ = 0;
};

std::vector<RunRecord> run_one_path(const ScenarioConfig& s, const Projector& proj,
                                    const GcusumEvaluator* gcusum, bool with_attack,
                                    std::size_t run_index, std::span<const double> h_grid) {
    const std::size_t H = h_grid.size();
    std::vector<RunRecord> rec(H);
    std::vector<bool> crossed(H, false);
    std::size_t remaining = H;
    PathGenerator path(s, proj, with_attack, run_index);

    double stat = 0.0;
    std::size_t next_rg = 0;  // RGCUSUM: thresholds ascend and omega never decreases
    while (remaining > 0 && path.t() < s.horizon) {
        const Residual r = path.next();
        if (gcusum) {
            const double v = gcusum->evaluate(r).value;
            stat = std::max(stat, 0.0) + v;
            for (std::size_t i = 0; i < H; ++i) {
                if (!crossed[i] && stat >= h_grid[i]) {
                    crossed[i] = true;
                    --remaining;
                    rec[i] = {path.t(), stat, stat - h_grid[i], false};
                }
            }
        } else {
            stat += rgcusum_increment(r, s.bounds, s.model.sigma2());
            while (next_rg < H && stat >= h_grid[next_rg]) {
                rec[next_rg] = {path.t(), stat, stat - h_grid[next_rg], false};
                crossed[next_rg] = true;
                ++next_rg;
                --remaining;
            }
        }
    }
    for (std::size_t i = 0; i < H; ++i) {
        if (!crossed[i]) rec[i] = {path.t(), stat, 0.0, true};
    }
    return rec;
}

template <class Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
    const std::size_t workers = worker_count(jobs);
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < jobs; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

std::vector<RunStats> simulate_grid(const ScenarioConfig& s, std::span<const double> h_grid,
                                    bool with_attack) {
    if (h_grid.empty()) throw Error(ErrorCode::InvalidArgument, "threshold grid is empty");
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        if (!(h_grid[i] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "thresholds must be >= 0");
        if (i > 0 && !(h_grid[i] > h_grid[i - 1])) {
            throw Error(ErrorCode::InvalidArgument, "threshold grid must be strictly ascending");
        }
    }
    if (s.runs < 1) throw Error(ErrorCode::InvalidArgument, "runs must be >= 1");
    if (s.horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");

    const Projector proj(s.model);
    std::optional<GcusumEvaluator> gcusum;
    if (s.detector == DetectorKind::Gcusum) gcusum.emplace(s.model, s.bounds, s.gcusum_guard);

    std::vector<std::vector<RunRecord>> per_run(s.runs);
    parallel_for(s.runs, [&](std::size_t run) {
        per_run[run] = run_one_path(s, proj, gcusum ? &*gcusum : nullptr, with_attack, run, h_grid);
    });

    const std::size_t onset = with_attack ? s.attack.onset : kNever;
    std::vector<RunStats> out;
    out.reserve(h_grid.size());
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        std::vector<RunRecord> col;
        col.reserve(s.runs);
        for (const auto& r : per_run) col.push_back(r[i]);
        out.push_back(summarize(h_grid[i], std::move(col), onset));
    }
    return out;
}

}  // namespace

AttackSpec AttackSpec::none() { return AttackSpec{}; }

AttackSpec AttackSpec::constant(Vector a, std::size_t onset) {
    AttackSpec s;
    s.kind = AttackKind::Constant;
    s.vectors.push_back(std::move(a));
    s.onset = onset;
    return s;
}

AttackSpec AttackSpec::cyclic(std::vector<Vector> vectors, double growth, std::size_t onset) {
    if (vectors.empty()) throw Error(ErrorCode::InvalidArgument, "cyclic attack needs vectors");
    AttackSpec s;
    s.kind = AttackKind::Cyclic;
    s.vectors = std::move(vectors);
    s.growth = growth;
    s.onset = onset;
    return s;
}

AttackSpec AttackSpec::custom(std::function<Vector(std::size_t)> generator, std::size_t onset) {
    AttackSpec s;
    s.kind = AttackKind::Custom;
    s.generator = std::move(generator);
    s.onset = onset;
    return s;
}

bool AttackSpec::active_at(std::size_t t) const noexcept {
    return kind != AttackKind::None && onset != kNever && t >= onset;
}

Vector AttackSpec::relative(std::size_t r) const {
    if (r < 1) throw Error(ErrorCode::InvalidArgument, "attack index starts at 1");
    switch (kind) {
        case AttackKind::None:
            throw Error(ErrorCode::InvalidArgument, "no attack configured");
        case AttackKind::Constant:
            return vectors.at(0);
        case AttackKind::Cyclic: {
            const Vector& v = vectors[(r - 1) % vectors.size()];
            return v * (1.0 + static_cast<double>(r) * growth);
        }
        case AttackKind::Custom:
            return generator(r);
    }
    return {};
}

AttackValidation validate_attack(const AttackSpec& attack, const Projector& proj,
                                 const AttackBounds& bounds) {
    AttackValidation out;
    if (attack.kind == AttackKind::None || attack.kind == AttackKind::Custom) return out;
    if (attack.onset == 0) throw Error(ErrorCode::InvalidArgument, "attack onset must be >= 1");
    for (std::size_t j = 0; j < attack.vectors.size(); ++j) {
        const Vector& a = attack.vectors[j];
        std::ostringstream what;
        what << "attack vector " << j + 1;
        check_length(a, proj.M(), what.str().c_str());
        const Vector mu = proj.P() * a;
        const double scale = mu.cwiseAbs().maxCoeff();
        std::vector<std::size_t> zeros;
        std::size_t below = 0, above = 0;
        for (Eigen::Index m = 0; m < mu.size(); ++m) {
            const double v = std::abs(mu[m]);
            if (v <= 1e-9 * std::max(scale, 1.0)) {
                zeros.push_back(static_cast<std::size_t>(m) + 1);
            } else if (v < bounds.rho_l()) {
                ++below;
            } else if (v > bounds.rho_u()) {
                ++above;
            }
        }
        if (below + above > 0) {
            std::ostringstream os;
            os << what.str() << ": detectable component has " << below << " entries below rho_L and "
               << above << " above rho_U on its support";
            out.warnings.push_back(os.str());
        }
        if (zeros.size() == proj.M()) {
            out.warnings.push_back(what.str() + " lies entirely in col(H) and is undetectable");
        }
        out.zero_sets.push_back(std::move(zeros));
    }
    return out;
}

ScenarioConfig::ScenarioConfig(LinearModel model_, AttackBounds bounds_)
    : model(std::move(model_)), bounds(bounds_) {}

std::uint64_t run_seed(std::uint64_t base_seed, std::uint64_t run_index) {
    return splitmix64(base_seed + splitmix64(run_index));
}

Vector generate_observation(const LinearModel& model, const Vector& theta, const Vector* attack,
                            Rng& rng) {
    if (static_cast<std::size_t>(theta.size()) != model.N()) {
        throw Error(ErrorCode::DimensionMismatch, "theta length does not match model columns");
    }
    Vector x = model.H() * theta;
    if (attack) {
        check_length(*attack, model.M(), "attack vector");
        x += *attack;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = model.sigma();
    for (Eigen::Index m = 0; m < x.size(); ++m) x[m] += sigma * normal(rng);
    return x;
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

namespace {

void mean_and_stderr(const std::vector<double>& xs, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (xs.empty()) return;
    const double n = static_cast<double>(xs.size());
    mean = pairwise_sum(xs) / n;
    if (xs.size() < 2) return;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
    se = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
}

}  // namespace

RunStats summarize(double h, std::vector<RunRecord> runs, std::size_t onset) {
    RunStats st;
    st.h = h;
    st.runs = std::move(runs);
    std::vector<double> stops, delays, over, ratio;
    std::size_t censored = 0;
    for (const RunRecord& r : st.runs) {
        stops.push_back(static_cast<double>(r.stop_time));
        double delay = static_cast<double>(r.stop_time);
        if (onset != kNever) {
            delay = r.stop_time + 1 >= onset ? static_cast<double>(r.stop_time + 1 - onset) : 0.0;
        }
        delays.push_back(delay);
        if (r.censored) {
            ++censored;
        } else {
            over.push_back(r.overshoot);
            if (h > 0.0) ratio.push_back(r.overshoot / h);
        }
    }
    mean_and_stderr(stops, st.mean_stop, st.stderr_stop);
    mean_and_stderr(delays, st.mean_delay, st.stderr_delay);
    double unused = 0.0;
    mean_and_stderr(over, st.mean_overshoot, unused);
    mean_and_stderr(ratio, st.mean_overshoot_ratio, unused);
    st.censored_fraction =
        st.runs.empty() ? 0.0 : static_cast<double>(censored) / static_cast<double>(st.runs.size());
    if (st.censored_fraction > kCensoringWarnFraction) {
        std::ostringstream os;
        os << "h=" << h << ": " << censored << " of " << st.runs.size()
           << " runs censored at the horizon; mean run length is a lower bound";
        st.warnings.push_back(os.str());
    }
    return st;
}

RunStats estimate_arl(const ScenarioConfig& scenario, double h) {
    const double grid[] = {h};
    return simulate_grid(scenario, grid, false).front();
}

RunStats estimate_edd(const ScenarioConfig& scenario, double h) {
    if (scenario.attack.kind == AttackKind::None) {
        throw Error(ErrorCode::InvalidArgument, "detection delay needs an attack");
    }
    const double grid[] = {h};
    return simulate_grid(scenario, grid, true).front();
}

std::vector<RunStats> simulate_thresholds(const ScenarioConfig& scenario,
                                          std::span<const double> h_grid) {
    return simulate_grid(scenario, h_grid, true);
}

std::vector<CurvePoint> curve_sweep(const ScenarioConfig& scenario, std::span<const double> h_grid) {
    if (scenario.attack.kind == AttackKind::None) {
        throw Error(ErrorCode::InvalidArgument, "curve sweep needs an attack for the delay column");
    }
    auto arl = simulate_grid(scenario, h_grid, false);
    auto edd = simulate_grid(scenario, h_grid, true);
    std::vector<CurvePoint> out;
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        out.push_back({h_grid[i], std::move(arl[i]), std::move(edd[i])});
    }
    return out;
}

std::vector<Vector> zeta_trace(const ScenarioConfig& scenario, std::size_t run_index,
                               std::size_t steps) {
    const Projector proj(scenario.model);
    PathGenerator path(scenario, proj, true, run_index);
    std::vector<Vector> out;
    out.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const Residual r = path.next();
        Vector z(r.x_tilde.size());
        for (Eigen::Index m = 0; m < z.size(); ++m) {
            z[m] = zeta(r.x_tilde[m], scenario.bounds, scenario.model.sigma2());
        }
        out.push_back(std::move(z));
    }
    return out;
}

PairedStops simulate_paired(const ScenarioConfig& scenario, double h, std::size_t run_index) {
    const Projector proj(scenario.model);
    const GcusumEvaluator gcusum(scenario.model, scenario.bounds, scenario.gcusum_guard);
    PathGenerator path(scenario, proj, true, run_index);
    auto rg = RgcusumState::initial(h);
    auto g = GcusumState::initial(h);
    PairedStops out;
    while ((!rg.alarmed || !g.alarmed) && path.t() < scenario.horizon) {
        const Residual r = path.next();
        if (!rg.alarmed) {
            rg = step(rg, r, scenario.bounds, scenario.model.sigma2());
            if (rg.alarmed) out.rgcusum = {rg.k, rg.omega, *rg.overshoot, false};
        }
        if (!g.alarmed) {
            g = step_g(g, gcusum.evaluate(r).value);
            if (g.alarmed) out.gcusum = {g.k, g.V, g.V - h, false};
        }
    }
    if (!rg.alarmed) out.rgcusum = {path.t(), rg.omega, 0.0, true};
    if (!g.alarmed) out.gcusum = {path.t(), g.V, 0.0, true};
    return out;
}

std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CUSUM_SENTINEL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) n = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

}  // namespace sentinel::sim

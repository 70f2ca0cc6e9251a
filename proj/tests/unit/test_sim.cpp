#include "doctest.h"
#include "support.hpp"

#include "sentinel/error.hpp"
#include "sentinel/sim.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>

using namespace sentinel;
using namespace sentinel::sim;

namespace {

ScenarioConfig ring_scenario(double sigma2 = 1.0) {
    ScenarioConfig s(build_model(testsupport::ring3_H(), sigma2), AttackBounds(0.5, 1.0));
    s.runs = 200;
    s.horizon = 5000;
    s.base_seed = 42;
    return s;
}

Vector ring_attack(const ScenarioConfig& s, double scale) {
    const Projector p(s.model);
    Vector a = Vector::Zero(6);
    a[0] = scale;
    a[1] = -scale;
    return p.P() * a;
}

struct ThreadsEnv {
    explicit ThreadsEnv(const char* v) { setenv("CUSUM_SENTINEL_THREADS", v, 1); }
    ~ThreadsEnv() { unsetenv("CUSUM_SENTINEL_THREADS"); }
};

}  // namespace

TEST_CASE("observations without noise reproduce H theta") {
    const auto model = build_model(testsupport::ring3_H(), 1e-300);
    Rng rng(1);
    Vector theta(2);
    theta << 0.3, -0.2;
    const Vector x = generate_observation(model, theta, nullptr, rng);
    CHECK((x - model.H() * theta).cwiseAbs().maxCoeff() <= 1e-12);
    Vector bad(3);
    bad.setZero();
    CHECK_THROWS_AS(generate_observation(model, bad, nullptr, rng), Error);
    Vector bad_attack = Vector::Zero(5);
    CHECK_THROWS_AS(generate_observation(model, theta, &bad_attack, rng), Error);
}

TEST_CASE("fixed seeds give identical observations") {
    const auto model = build_model(testsupport::ring3_H(), 0.5);
    const Vector theta = Vector::Zero(2);
    Rng a(run_seed(9, 3)), b(run_seed(9, 3));
    for (int i = 0; i < 10; ++i) CHECK(generate_observation(model, theta, nullptr, a) ==
                                       generate_observation(model, theta, nullptr, b));
    CHECK(run_seed(9, 3) != run_seed(9, 4));
    CHECK(run_seed(9, 3) != run_seed(10, 3));
}

TEST_CASE("noise covariance matches sigma2 I") {
    const double sigma2 = 0.7;
    Matrix h(3, 1);
    h << 1, 2, 3;
    const auto model = build_model(h, sigma2);
    Rng rng(123);
    const int draws = 100000;
    Matrix sum = Matrix::Zero(3, 3);
    Matrix sumsq = Matrix::Zero(3, 3);
    for (int i = 0; i < draws; ++i) {
        const Vector n = generate_observation(model, Vector::Zero(1), nullptr, rng);
        const Matrix outer = n * n.transpose();
        sum += outer;
        sumsq += outer.cwiseProduct(outer);
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double mean = sum(i, j) / draws;
            const double var = sumsq(i, j) / draws - mean * mean;
            const double se = std::sqrt(var / draws);
            const double target = i == j ? sigma2 : 0.0;
            CHECK(std::abs(mean - target) <= 3 * se);
        }
    }
}

TEST_CASE("zero threshold stops every run at t = 1") {
    auto s = ring_scenario();
    const auto st = estimate_arl(s, 0.0);
    CHECK(st.mean_stop == 1.0);
    CHECK(st.stderr_stop == 0.0);
    CHECK(st.censored_fraction == 0.0);
}

TEST_CASE("estimates are reproducible and independent of worker count") {
    auto s = ring_scenario();
    s.attack = AttackSpec::constant(ring_attack(s, 1.0));
    std::vector<double> grid = {5.0, 20.0, 60.0};
    std::vector<RunStats> one, four;
    {
        ThreadsEnv env("1");
        CHECK(worker_count(100) == 1);
        one = simulate_thresholds(s, grid);
    }
    {
        ThreadsEnv env("4");
        CHECK(worker_count(100) == 4);
        CHECK(worker_count(2) == 2);
        four = simulate_thresholds(s, grid);
    }
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].mean_delay == four[i].mean_delay);
        CHECK(one[i].mean_overshoot == four[i].mean_overshoot);
        for (std::size_t r = 0; r < one[i].runs.size(); ++r) {
            CHECK(one[i].runs[r].stop_time == four[i].runs[r].stop_time);
            CHECK(one[i].runs[r].statistic == four[i].runs[r].statistic);
        }
    }
    const auto again = simulate_thresholds(s, grid);
    CHECK(again[1].mean_delay == one[1].mean_delay);
}

TEST_CASE("doubling h roughly doubles the false-alarm period") {
    auto s = ring_scenario();
    s.runs = 300;
    const double a1 = estimate_arl(s, 40.0).mean_stop;
    const double a2 = estimate_arl(s, 80.0).mean_stop;
    const double a3 = estimate_arl(s, 160.0).mean_stop;
    // ARL grows linearly in h: the secant slope matches ARL / h at the middle point
    const double slope = (a3 - a1) / 120.0;
    const double ratio = a2 / 80.0;
    CHECK(slope == doctest::Approx(ratio).epsilon(0.2));
    CHECK(a2 / a1 == doctest::Approx(2.0).epsilon(0.2));
    CHECK(a3 / a2 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("large-h delay follows h over the mean increment") {
    auto s = ring_scenario();
    s.attack = AttackSpec::constant(ring_attack(s, 1.5));
    s.runs = 300;
    // oracle: Monte Carlo mean of the per-step increment under the attack
    const Projector p(s.model);
    Rng rng(777);
    const Vector a = s.attack.vectors[0];
    double g = 0.0;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) {
        const Vector x = generate_observation(s.model, Vector::Zero(2), &a, rng);
        g += rgcusum_increment(residual(p, x), s.bounds, s.model.sigma2());
    }
    g /= draws;
    const double h = 400.0;
    const auto st = estimate_edd(s, h);
    CHECK(st.mean_delay == doctest::Approx(h / g).epsilon(0.1));
    CHECK(st.censored_fraction == 0.0);
    CHECK(st.mean_overshoot_ratio < 0.05);
}

TEST_CASE("curve columns are nondecreasing in h") {
    auto s = ring_scenario();
    s.attack = AttackSpec::constant(ring_attack(s, 1.0));
    s.runs = 100;
    const std::vector<double> grid = {2.0, 5.0, 10.0, 20.0, 40.0};
    const auto curve = curve_sweep(s, grid);
    REQUIRE(curve.size() == grid.size());
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].arl.mean_stop >= curve[i - 1].arl.mean_stop);
        CHECK(curve[i].edd.mean_delay >= curve[i - 1].edd.mean_delay);
        for (std::size_t r = 0; r < curve[i].arl.runs.size(); ++r) {
            CHECK(curve[i].arl.runs[r].stop_time >= curve[i - 1].arl.runs[r].stop_time);
        }
    }
    // a single-threshold estimate sees the same paths as the sweep
    CHECK(estimate_arl(s, 10.0).mean_stop == curve[2].arl.mean_stop);
}

TEST_CASE("sweep arguments are validated") {
    auto s = ring_scenario();
    const std::vector<double> descending = {5.0, 2.0};
    CHECK_THROWS_AS(simulate_thresholds(s, descending), Error);
    CHECK_THROWS_AS(curve_sweep(s, std::vector<double>{1.0}), Error);  // no attack
    CHECK_THROWS_AS(estimate_edd(s, 1.0), Error);
}

TEST_CASE("censoring is reported and warned about") {
    auto s = ring_scenario();
    s.horizon = 5;
    s.runs = 50;
    const auto st = estimate_arl(s, 1e6);
    CHECK(st.censored_fraction == 1.0);
    CHECK(st.mean_stop == 5.0);
    CHECK_FALSE(st.warnings.empty());
    for (const auto& r : st.runs) {
        CHECK(r.censored);
        CHECK(r.overshoot == 0.0);
    }
}

TEST_CASE("summaries are computed from the per-run records") {
    std::vector<RunRecord> runs = {{3, 10.5, 0.5, false}, {5, 11.0, 1.0, false}, {7, 4.0, 0.0, true}};
    const auto st = summarize(10.0, runs, 2);
    CHECK(st.mean_stop == doctest::Approx(5.0));
    CHECK(st.stderr_stop == doctest::Approx(std::sqrt(4.0 / 3.0)));
    CHECK(st.mean_delay == doctest::Approx(4.0));
    CHECK(st.mean_overshoot == doctest::Approx(0.75));
    CHECK(st.mean_overshoot_ratio == doctest::Approx(0.075));
    CHECK(st.censored_fraction == doctest::Approx(1.0 / 3.0));
    CHECK(st.warnings.size() == 1);
}

TEST_CASE("pairwise summation") {
    std::vector<double> v(1000);
    std::iota(v.begin(), v.end(), 1.0);
    CHECK(pairwise_sum(v) == 500500.0);
    CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
}

TEST_CASE("attack indexing") {
    Vector u = Vector::Ones(2), w = 2 * Vector::Ones(2);
    const auto cyc = AttackSpec::cyclic({u, w}, 1e-3, 4);
    CHECK_FALSE(cyc.active_at(3));
    CHECK(cyc.active_at(4));
    CHECK(cyc.relative(1)[0] == doctest::Approx(1.001));
    CHECK(cyc.relative(2)[0] == doctest::Approx(2 * 1.002));
    CHECK(cyc.relative(3)[0] == doctest::Approx(1.003));
    CHECK_THROWS_AS(cyc.relative(0), Error);
    CHECK_FALSE(AttackSpec::none().active_at(1));
    const auto custom = AttackSpec::custom([](std::size_t r) { return Vector::Constant(2, double(r)); });
    CHECK(custom.relative(5)[1] == 5.0);
}

TEST_CASE("attack validation") {
    const auto s = ring_scenario();
    const Projector p(s.model);
    SUBCASE("wrong length is a dimension error") {
        try {
            validate_attack(AttackSpec::constant(Vector::Ones(5)), p, s.bounds);
            FAIL("expected DimensionMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DimensionMismatch);
        }
    }
    SUBCASE("band check follows the detectable component") {
        Vector a = p.complement_basis().col(0);
        a *= 0.75 / a.cwiseAbs().maxCoeff();
        const auto v = validate_attack(AttackSpec::constant(a), p, s.bounds);
        REQUIRE(v.zero_sets.size() == 1);
        const double smallest = a.cwiseAbs().minCoeff();
        CHECK(v.warnings.empty() == (smallest >= 0.5 || smallest <= 1e-9 * 0.75));
    }
    SUBCASE("pure H c attack is flagged as undetectable") {
        Vector c(2);
        c << 0.3, 0.1;
        const auto v = validate_attack(AttackSpec::constant(s.model.H() * c), p, s.bounds);
        REQUIRE(v.zero_sets.size() == 1);
        CHECK(v.zero_sets[0].size() == 6);
        CHECK_FALSE(v.warnings.empty());
    }
}

TEST_CASE("zeta traces ignore theta and H c") {
    auto s = ring_scenario();
    s.attack = AttackSpec::constant(ring_attack(s, 1.0));
    const auto base = zeta_trace(s, 0, 50);
    auto s2 = s;
    s2.theta = [](std::size_t t) { Vector v(2); v << 0.1 * t, -0.05 * t; return v; };
    Vector c(2);
    c << 2.0, -1.0;
    auto s3 = s;
    s3.attack = AttackSpec::constant(s.attack.vectors[0] + s.model.H() * c);
    const auto t2 = zeta_trace(s2, 0, 50);
    const auto t3 = zeta_trace(s3, 0, 50);
    for (std::size_t t = 0; t < base.size(); ++t) {
        CHECK((base[t] - t2[t]).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((base[t] - t3[t]).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("paired runs: relaxed detector never stops later") {
    auto s = ring_scenario();
    s.attack = AttackSpec::constant(ring_attack(s, 0.8));
    s.horizon = 2000;
    for (std::size_t run = 0; run < 100; ++run) {
        const auto p = simulate_paired(s, 15.0, run);
        CHECK(p.rgcusum.stop_time <= p.gcusum.stop_time);
    }
}

TEST_CASE("gcusum detector runs through the harness") {
    auto s = ring_scenario();
    s.attack = AttackSpec::constant(ring_attack(s, 1.0));
    s.detector = DetectorKind::Gcusum;
    s.runs = 20;
    const auto g = estimate_edd(s, 10.0);
    s.detector = DetectorKind::Rgcusum;
    const auto r = estimate_edd(s, 10.0);
    CHECK(r.mean_delay <= g.mean_delay);
}

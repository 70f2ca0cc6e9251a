#include "doctest.h"
#include "support.hpp"

#include "sentinel/error.hpp"
#include "sentinel/rgcusum.hpp"

#include <cmath>

using namespace sentinel;

namespace {

const AttackBounds kPaper(0.025, 100.0);

// Direct maximization of (2 mu x - mu^2)/(2 sigma2) over the admissible band
// with a grid plus both endpoints; independent of the closed form.
double zeta_grid(double x, double rl, double ru, double sigma2, int points) {
    double best = -INFINITY;
    for (int sgn : {-1, 1}) {
        for (int i = 0; i <= points; ++i) {
            const double mu = sgn * (rl + (ru - rl) * i / points);
            best = std::max(best, (2 * mu * x - mu * mu) / (2 * sigma2));
        }
        const double inner = sgn * std::clamp(std::abs(x), rl, ru);
        best = std::max(best, (2 * inner * x - inner * inner) / (2 * sigma2));
    }
    return best;
}

Residual res(std::initializer_list<double> v) {
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x[i++] = e;
    return Residual{x};
}

}  // namespace

TEST_CASE("zeta examples") {
    CHECK(zeta(0.0, kPaper, 0.005) == doctest::Approx(-0.0625));
    CHECK(zeta(1.0, kPaper, 0.005) == doctest::Approx(100.0));
    CHECK(zeta(200.0, kPaper, 0.005) == doctest::Approx(3.0e6));
    CHECK(zeta(-200.0, kPaper, 0.005) == doctest::Approx(3.0e6));
    CHECK(zeta(0.025, kPaper, 0.005) == doctest::Approx(0.0625));
    CHECK(zeta(-0.025, kPaper, 0.005) == doctest::Approx(0.0625));
}

TEST_CASE("zeta is continuous at both breakpoints") {
    const AttackBounds b(0.3, 2.0);
    for (double edge : {0.3, 2.0, -0.3, -2.0}) {
        const double lo = zeta(std::nextafter(edge, 0.0), b, 0.7);
        const double hi = zeta(std::nextafter(edge, edge * 2), b, 0.7);
        CHECK(lo == doctest::Approx(hi).epsilon(1e-12));
    }
}

TEST_CASE("zeta matches the constrained supremum") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const double rl = 0.01 + 2 * u(rng);
        const double ru = rl + 5 * u(rng);
        const double sigma2 = 0.01 + 3 * u(rng);
        const double x = (u(rng) - 0.5) * 3 * (ru + 1);
        const double z = zeta(x, AttackBounds(rl, ru), sigma2);
        const double g = zeta_grid(x, rl, ru, sigma2, 20000);
        const double scale = std::max({std::abs(z), (2 * ru * std::abs(x) + ru * ru) / (2 * sigma2) * 1e-3, 1e-12});
        CHECK(std::abs(z - g) <= 1e-6 * scale);
    }
}

TEST_CASE("zeta is invariant under joint rescaling") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double rl = u(rng), ru = rl + u(rng), s2 = u(rng), c = u(rng);
        const double x = (u(rng) - 1.5) * 2 * ru;
        const double a = zeta(x, AttackBounds(rl, ru), s2);
        const double b = zeta(c * x, AttackBounds(c * rl, c * ru), c * c * s2);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("AttackBounds rejects inverted or nonpositive bands") {
    CHECK_THROWS_AS(AttackBounds(0.0, 1.0), Error);
    CHECK_THROWS_AS(AttackBounds(2.0, 1.0), Error);
    CHECK_NOTHROW(AttackBounds(1.0, 1.0));
}

TEST_CASE("step examples") {
    auto s = RgcusumState::initial(0.9);
    s = step_increment(s, 0.47);
    CHECK(s.omega == doctest::Approx(0.47));
    CHECK_FALSE(s.alarmed);
    CHECK_FALSE(s.overshoot.has_value());
    s = step_increment(s, 0.47);
    CHECK(s.omega == doctest::Approx(0.94));
    CHECK(s.alarmed);
    REQUIRE(s.overshoot.has_value());
    CHECK(*s.overshoot == doctest::Approx(0.04));
    CHECK(s.k == 2);
    try {
        step_increment(s, 0.1);
        FAIL("stepping after alarm must throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SteppedAfterAlarm);
    }
}

TEST_CASE("zero threshold alarms on the first sample") {
    auto s = RgcusumState::initial(0.0);
    s = step(s, res({0.0, 0.0}), kPaper, 0.005);
    CHECK(s.alarmed);
    CHECK(s.k == 1);
}

TEST_CASE("run_rgcusum on deterministic streams") {
    Matrix h(3, 1);
    h << 1, 1, 1;
    const auto model = build_model(h, 1.0);
    const Projector p(model);
    const AttackBounds b(0.5, 2.0);

    SUBCASE("all-zero stream never alarms") {
        std::vector<Vector> xs(50, Vector::Zero(3));
        const auto r = run_rgcusum(xs, model, p, b, 1.0);
        CHECK(r.censored);
        CHECK(r.omega_final == 0.0);
        CHECK(r.t_alarm == 50);
    }
    SUBCASE("constant residual alarms at ceil(h / g)") {
        Vector x(3);
        x << 1, 0, -1;  // already orthogonal to the ones column
        const double g = rgcusum_increment(Residual{x}, b, 1.0);
        CHECK(g == doctest::Approx(1.0));
        std::vector<Vector> xs(100, x);
        for (double hh : {0.5, 1.0, 7.3, 20.0}) {
            const auto r = run_rgcusum(xs, model, p, b, hh);
            CHECK_FALSE(r.censored);
            CHECK(r.t_alarm == static_cast<std::size_t>(std::ceil(hh / g)));
        }
    }
    SUBCASE("requires a positive threshold") {
        std::vector<Vector> xs(2, Vector::Zero(3));
        CHECK_THROWS_AS(run_rgcusum(xs, model, p, b, 0.0), Error);
    }
}

TEST_CASE("recursion equals the batch double sum exactly") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix H = testsupport::random_matrix(rng, 8, 3);
        const auto model = build_model(H, 0.5);
        const Projector p(model);
        const AttackBounds b(0.2, 1.5);
        std::vector<Vector> xs;
        for (int t = 0; t < 200; ++t) xs.push_back(testsupport::random_vector(rng, 8));
        const auto r = run_rgcusum(xs, model, p, b, 1e300);
        REQUIRE(r.omega_trace.size() == xs.size());
        double batch = 0.0;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            const Vector xt = p.P() * xs[t];
            double inner = 0.0;
            for (Eigen::Index m = 0; m < xt.size(); ++m) inner += std::max(zeta(xt[m], b, 0.5), 0.0);
            batch += inner;
            CHECK(r.omega_trace[t] == batch);
        }
        for (std::size_t t = 1; t < r.omega_trace.size(); ++t) CHECK(r.omega_trace[t] >= r.omega_trace[t - 1]);
    }
}

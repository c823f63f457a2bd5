#include <doctest.h>

#include "oracles.hpp"
#include "wrlab/ball_calculus.hpp"

using namespace wrlab;

namespace {
const Point kOrigin{0.0, 0.0, 0.0};
}

TEST_CASE("ball averages: closed forms and oracle") {
    const Ball unit{kOrigin, 1.0};
    CHECK(ball_average(Weight::constant(5.0, 2), Ball{{0.3, 0.4, 0.0}, 0.7}, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
    const Weight w = Weight::power(0.5, kOrigin, 2);
    CHECK(ball_average(w, unit, 1.0) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(ball_average(w, unit, -2.0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(weight_measure(Weight::power(0.3, kOrigin, 2), unit) ==
          doctest::Approx(2.0 * std::numbers::pi / 2.3).epsilon(1e-10));
    CHECK(weight_measure(Weight::constant(1.0, 2), unit) == doctest::Approx(std::numbers::pi).epsilon(1e-13));

    QuadratureSpec tight;
    tight.rel_tol = 1e-11;
    for (int n : {1, 2}) {
        for (double a : {-0.5, 0.3, 0.9}) {
            for (double r : {0.25, 1.0, 3.0}) {
                const double exact = n * std::pow(r, a) / (n + a);
                CHECK(ball_average(Weight::power(a, kOrigin, n), Ball{kOrigin, r}, 1.0, tight) ==
                      doctest::Approx(exact).epsilon(1e-9));
            }
        }
    }

    // Off-centre ball containing the singular point, against the polar oracle.
    const Weight v = Weight::power(-0.6, kOrigin, 2);
    const Ball b{{0.3, -0.2, 0.0}, 0.5};
    const double got = ball_integral(v, b, 1.0);
    const double ref = oracle::disc_polar([](double x, double y) { return std::pow(std::hypot(x, y), -0.6); }, 0.3, -0.2,
                                          0.5, 0.0, 0.0);
    CHECK(got == doctest::Approx(ref).epsilon(1e-6));
    // Ball with the log discontinuity sphere crossing it.
    const Weight lg = Weight::logtype(kOrigin, 2);
    const Ball c{{0.2, 0.1, 0.0}, 0.4};
    const double ref_log = oracle::disc_polar(
        [](double x, double y) {
            const double r = std::hypot(x, y);
            return r <= std::exp(-1.0) ? -std::log(r) : 1.0;
        },
        0.2, 0.1, 0.4, 0.0, 0.0, 48);
    CHECK(ball_integral(lg, c, 1.0) == doctest::Approx(ref_log).epsilon(1e-5));
}

TEST_CASE("divergent integrals are reported") {
    const Weight w = Weight::power(-2.5, kOrigin, 2);
    const BallFamily F = BallFamily::lattice(2, Ball{kOrigin, 1.0}, 0.5, 0.25);
    CHECK_THROWS_AS(ap_characteristic(w, 1.5, F), NumericalError);
    CHECK_THROWS_AS(ap_characteristic(Weight::constant(1.0, 2), 1.0, F), DomainError);
}

TEST_CASE("A_p characteristic") {
    const BallFamily F = BallFamily::lattice(2, Ball{kOrigin, 2.0}, 0.5, 0.25);
    for (double p : {1.5, 2.0, 3.0}) {
        CHECK(ap_characteristic(Weight::constant(3.0, 2), p, F).value == doctest::Approx(1.0).epsilon(1e-12));
    }
    const Weight w = Weight::power(0.3, kOrigin, 2);
    const auto est = ap_characteristic(w, 1.5, F);
    for (double v : est.per_ball) CHECK(v >= 1.0 - 1e-9);
    const double origin_ball = (2.0 / 2.3) * std::pow(2.0 / (2.0 - 0.6), 0.5);
    CHECK(est.value >= origin_ball * (1.0 - 1e-8));
    // Refinement stability and monotonicity under enlargement.
    const auto fine = ap_characteristic(w, 1.5, F.refined(2));
    CHECK(fine.value >= est.value * (1.0 - 1e-9));
    CHECK(fine.value <= est.value * 1.02);

    // Duality between [w]_{A_{1+1/n}} and [w^{-n}]_{A_{n+1}} per ball.
    const BallFamily R = BallFamily::random(2, Ball{kOrigin, 1.5}, 40, 7, 0.05);
    const auto a = ap_characteristic(w, 1.5, R);
    const auto d = ap_characteristic(Weight::power_of(w, -2.0), 3.0, R);
    for (std::size_t i = 0; i < R.balls.size(); ++i) {
        CHECK(d.per_ball[i] == doctest::Approx(a.per_ball[i] * a.per_ball[i]).epsilon(1e-9));
    }
}

TEST_CASE("weighted BMO") {
    const Ball omega{kOrigin, 3.0};
    const BallFamily F = BallFamily::lattice(2, omega, 0.75, 0.375);
    CHECK(bmo_weighted(Weight::constant(2.0, 2), omega, F).value <= 1e-12);
    CHECK(bmo_q(Weight::constant(2.0, 2), 3.0, omega, F).value <= 1e-12);

    const Weight w = Weight::power(0.1, kOrigin, 2);
    const auto b1 = bmo_weighted(w, omega, F);
    const auto bq = bmo_q(w, 1.0, omega, F);
    CHECK(b1.value == bq.value);
    CHECK(b1.value > 0.0);

    // Origin unit ball: radial oracle split at the level set |x|^a = m.
    const double a = 0.1;
    const double m = 2.0 / (2.0 + a);
    const double rho = std::pow(m, 1.0 / a);
    const auto g = oracle::gauss_legendre(30);
    auto rad = [&](double s) { return std::abs(std::pow(s, a) - m) * s; };
    const double osc = 2.0 * std::numbers::pi *
                       (oracle::composite(rad, 0.0, rho, 32, g) + oracle::composite(rad, rho, 1.0, 32, g));
    const double ratio = osc / (m * std::numbers::pi);
    CHECK(bmo_ball_quantity(w, Ball{kOrigin, 1.0}, 1.0) == doctest::Approx(ratio).epsilon(1e-6));

    // Translation covariance.
    const Point shift{0.4, -0.7, 0.0};
    const Weight ws = Weight::power(0.1, shift, 2);
    const Ball B{{0.3, 0.2, 0.0}, 0.5};
    const Ball Bs{{0.7, -0.5, 0.0}, 0.5};
    CHECK(bmo_ball_quantity(ws, Bs, 1.0) == doctest::Approx(bmo_ball_quantity(w, B, 1.0)).epsilon(1e-6));
}

TEST_CASE("truncation bound verification") {
    const BallFamily F = BallFamily::lattice(2, Ball{kOrigin, 1.0}, 0.5, 0.25);
    const Report r1 = verify_truncation_bounds(Weight::constant(1.0, 2), 2.0, {TruncationMode::upper_at(5.0)}, F);
    CHECK(r1.passed());
    const Report r2 =
        verify_truncation_bounds(Weight::power(0.3, kOrigin, 2), 1.5, {TruncationMode::band(0.5, 2.0)}, F);
    CHECK(r2.passed());
    CHECK(r2.checks.size() == 2);
}

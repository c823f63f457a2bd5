#include <doctest.h>

#include <algorithm>
#include <vector>

#include "oracles.hpp"
#include "wrlab/config.hpp"
#include "wrlab/weights.hpp"

using namespace wrlab;

namespace {
const Point kOrigin{0.0, 0.0, 0.0};
double ev(const Weight& w, std::vector<double> x) { return w.eval(x).value(); }
}  // namespace

TEST_CASE("pointwise examples") {
    CHECK(ev(Weight::constant(1.0, 2), {0.3, -0.2}) == 1.0);
    CHECK(ev(Weight::power(0.5, kOrigin, 2), {4.0, 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(ev(Weight::logtype(kOrigin, 2), {std::exp(-2.0), 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(ev(Weight::logtype(kOrigin, 2), {0.5, 0.0}) == 1.0);
}

TEST_CASE("singular points are tagged, never NaN") {
    const Weight blow = Weight::power(-0.5, kOrigin, 2);
    const Weight vanish = Weight::power(0.5, kOrigin, 2);
    const Weight lg = Weight::logtype({0.2, 0.1, 0.0}, 2);
    std::vector<double> zero{0.0, 0.0};
    CHECK(blow.eval(zero).is_singular());
    CHECK(blow.eval(zero).kind() == SingularKind::blowUp);
    CHECK(vanish.eval(zero).kind() == SingularKind::vanish);
    CHECK(lg.eval(std::vector<double>{0.2, 0.1}).is_singular());
    CHECK_THROWS_AS(blow.eval(zero).value(), DomainError);
    CHECK(blow.singular_points().size() == 1);
    // A band truncation removes the singularity.
    const Weight band = truncate(blow, TruncationMode::band(0.5, 2.0));
    CHECK(band.singular_points().empty());
    CHECK(ev(band, {0.0, 0.0}) == 2.0);
    // The product of a blow-up and a vanishing factor is undefined at the shared point.
    const Weight prod = Weight::product({blow, vanish});
    CHECK(prod.eval(zero).is_singular());
}

TEST_CASE("dimension mismatch") {
    CHECK_THROWS_AS(Weight::constant(1.0, 2).eval(std::vector<double>{1.0}), DomainError);
    CHECK_THROWS_AS(Weight::constant(1.0, 4), DomainError);
}

TEST_CASE("truncation modes") {
    CHECK(ev(truncate(Weight::constant(3.0, 2), TruncationMode::upper_at(1.0)), {0.7, 0.1}) == 1.0);
    CHECK(ev(truncate(Weight::power(0.5, kOrigin, 2), TruncationMode::band(0.5, 2.0)), {9.0, 0.0}) == 2.0);
    CHECK_THROWS_AS(Weight::power(1.0, kOrigin, 2, true), DomainError);
    CHECK_THROWS_AS(truncate(Weight::constant(1.0, 2), TruncationMode::upper_at(0.0)), DomainError);
    CHECK_THROWS_AS(truncate(Weight::constant(1.0, 2), TruncationMode::band(2.0, 2.0)), DomainError);

    // band = lower o upper exactly, and upper k <= min(k, w).
    const Weight w = Weight::power(-0.7, {0.1, 0.0, 0.0}, 2);
    const Weight band = truncate(w, TruncationMode::band(0.8, 1.7));
    const Weight composed = truncate(truncate(w, TruncationMode::upper_at(1.7)), TruncationMode::lower_at(0.8));
    const Weight up = truncate(w, TruncationMode::upper_at(1.3));
    for (double x = -1.0; x <= 1.0; x += 0.0625) {
        for (double y = -1.0; y <= 1.0; y += 0.125) {
            const Point p{x, y, 0.0};
            if (distance(p, {0.1, 0.0, 0.0}, 2) == 0.0) continue;
            CHECK(band(p) == composed(p));
            CHECK(up(p) == std::min(1.3, w(p)));
        }
    }
}

TEST_CASE("composites are order independent") {
    const Weight a = Weight::power(0.3, {0.1, 0.2, 0.0}, 2);
    const Weight b = Weight::logtype({-0.2, 0.05, 0.0}, 2);
    const Weight c = Weight::power(-0.4, {0.3, -0.3, 0.0}, 2);
    const Weight p1 = Weight::product({a, b, c});
    const Weight p2 = Weight::product({c, a, b});
    const Weight s1 = Weight::weighted_sum({{2.0, a}, {0.5, b}, {1.5, c}});
    const Weight s2 = Weight::weighted_sum({{1.5, c}, {2.0, a}, {0.5, b}});
    for (double x = -0.9; x < 0.9; x += 0.173) {
        const Point p{x, 0.37 * x - 0.11, 0.0};
        CHECK(p1(p) == doctest::Approx(p2(p)).epsilon(1e-14));
        CHECK(s1(p) == doctest::Approx(s2(p)).epsilon(1e-14));
    }
}

TEST_CASE("mollifier bump") {
    for (int n = 1; n <= 3; ++n) {
        // max value c_n e^{-1} stays below 1
        CHECK(mollifier({0.0, 0.0, 0.0}, n) <= 1.0);
    }
    // Unit mass in 2D via the polar oracle.
    const double mass = oracle::disc_polar(
        [](double x, double y) { return mollifier({x, y, 0.0}, 2); }, 0.0, 0.0, 1.0, 0.0, 0.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mollified weights") {
    const Weight c = mollify(Weight::constant(2.5, 2), 0.2);
    CHECK(c({0.3, -0.1, 0.0}) == doctest::Approx(2.5).epsilon(1e-8));

    // power(0.3) mollified at 0 against a radial Gauss oracle:
    // 2 pi c_2 eps^{-2} int_0^eps s^{1.3} exp(-1/(1-(s/eps)^2)) ds
    const double eps = 0.1;
    const Weight m = mollify(Weight::power(0.3, kOrigin, 2), eps);
    const double v = m({0.0, 0.0, 0.0});
    const auto g = oracle::gauss_legendre(40);
    const double radial = oracle::composite(
        [&](double s) {
            const double t = s / eps;
            return std::pow(s, 1.3) * std::exp(-1.0 / (1.0 - t * t));
        },
        0.0, eps, 64, g);
    const double expected = 2.0 * std::numbers::pi * mollifier_constant(2) / (eps * eps) * radial;
    CHECK(v > 0.0);
    CHECK(v == doctest::Approx(expected).epsilon(1e-7));

    // Off-centre point through the radial table vs direct disc oracle.
    const Point x{0.13, 0.05, 0.0};
    const double tab = m(x);
    const double direct = oracle::disc_polar(
        [&](double y1, double y2) {
            const double d1 = (x[0] - y1) / eps, d2 = (x[1] - y2) / eps;
            const double s2 = d1 * d1 + d2 * d2;
            if (s2 >= 1.0) return 0.0;
            return std::pow(std::hypot(y1, y2), 0.3) * mollifier_constant(2) / (eps * eps) * std::exp(-1.0 / (1.0 - s2));
        },
        x[0], x[1], eps, x[0], x[1], 24);
    CHECK(tab == doctest::Approx(direct).epsilon(1e-6));

    const Weight ml = mollify(Weight::logtype(kOrigin, 2), 0.01);
    CHECK(std::abs(ml({std::exp(-2.0), 0.0, 0.0}) - 2.0) < 0.05);
    CHECK_THROWS_AS(mollify(Weight::constant(1.0, 2), 0.0), DomainError);
}

TEST_CASE("weight spec grammar") {
    const Weight w = parse_weight("product(log(center=0.2,0), log(center=-0.3,0.1))", 2);
    const Point p{0.05, 0.02, 0.0};
    const double expected = -std::log(std::hypot(0.05 - 0.2, 0.02)) * -std::log(std::hypot(0.05 + 0.3, 0.02 - 0.1));
    CHECK(w(p) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(w.singular_points().size() == 2);

    const Weight s = parse_weight("sum(2*power(alpha=0.1), 0.5*constant(c=3))", 2);
    CHECK(s({1.0, 0.0, 0.0}) == doctest::Approx(3.5));
    const Weight t = parse_weight("truncate(power(alpha=-0.4), lower=0.5, upper=2)", 2);
    CHECK(t({0.0, 1e-9, 0.0}) == 2.0);
    CHECK(parse_weight(t.spec_string(), 2)({0.3, 0.0, 0.0}) == t({0.3, 0.0, 0.0}));
    CHECK(parse_weight(w.spec_string(), 2)(p) == w(p));

    CHECK_THROWS_AS(parse_weight("power()", 2), DomainError);
    CHECK_THROWS_AS(parse_weight("power(alpha=1, claim=1)", 2), DomainError);
    CHECK_THROWS_AS(parse_weight("log(center=1)", 2), DomainError);
    CHECK_THROWS_AS(parse_weight("blob(x=1)", 2), DomainError);
    CHECK_THROWS_AS(parse_weight("power(alpha=0.3) extra", 2), DomainError);
}

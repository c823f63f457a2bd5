#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "wrlab/geometry.hpp"

using namespace wrlab;

namespace {
const Point kOrigin{0.0, 0.0, 0.0};
}

TEST_CASE("cylinder heights") {
    const Weight one = Weight::constant(1.0, 2);
    const auto c = make_cylinder(one, kOrigin, 0.0, 0.5, CylinderKind::C);
    CHECK(c.height() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(c.t_begin() == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(c.t_end() == 0.0);

    // ((|x|^{-0.6})_{B_1})^{1/2} by a radial Gauss oracle: 2 int_0^1 s^{0.4} ds.
    const auto g = oracle::gauss_legendre(30);
    const double avg = 2.0 * oracle::composite([](double s) { return std::pow(s, 0.4); }, 0.0, 1.0, 64, g);
    const auto q = make_cylinder(Weight::power(0.3, kOrigin, 2), kOrigin, 0.0, 1.0, CylinderKind::Q);
    CHECK(q.height() == doctest::Approx(std::sqrt(avg)).epsilon(1e-6));
    CHECK(q.height() == doctest::Approx(std::sqrt(2.0 / 1.4)).epsilon(1e-9));
    CHECK(q.duration() == doctest::Approx(2.0 * q.height()).epsilon(1e-15));

    CHECK_THROWS_AS(make_cylinder(one, kOrigin, 0.0, 0.0, CylinderKind::C), DomainError);
    CHECK_THROWS_AS(make_cylinder(one, kOrigin, 0.0, -1.0, CylinderKind::C), DomainError);

    // Scaling the weight by c scales the height by 1/c.
    const Weight w = Weight::power(-0.4, {0.2, 0.1, 0.0}, 2);
    const Weight w3 = Weight::weighted_sum({{3.0, w}});
    const Point y{0.1, -0.3, 0.0};
    const double h1 = make_cylinder(w, y, 0.0, 0.7, CylinderKind::C).height();
    const double h3 = make_cylinder(w3, y, 0.0, 0.7, CylinderKind::C).height();
    CHECK(h3 == doctest::Approx(h1 / 3.0).epsilon(1e-6));
}

TEST_CASE("cylinder measures") {
    const auto c = make_cylinder(Weight::constant(1.0, 2), kOrigin, 0.0, 1.0, CylinderKind::C);
    const auto m = cylinder_measure(c);
    CHECK(m.measure == doctest::Approx(std::numbers::pi).epsilon(1e-13));
    CHECK(m.measure == doctest::Approx(m.lower).epsilon(1e-13));
    CHECK(m.bounds_ok);

    const Weight w = Weight::power(0.3, kOrigin, 2, true);
    const auto cc = make_cylinder(w, kOrigin, 0.0, 1.0, CylinderKind::C);
    const auto mc = cylinder_measure(cc);
    const auto mq = cylinder_measure(cc.with_kind(CylinderKind::Q));
    CHECK(mq.measure == doctest::Approx(2.0 * mc.measure).epsilon(1e-12));
    CHECK(mc.bounds_ok);
    CHECK(mc.measure >= std::numbers::pi);
    CHECK(mc.measure <= mc.a_used * std::numbers::pi * (1.0 + 1e-9));
    // Oracle: w(B_1) = 2 pi / 2.3, times the height.
    CHECK(mc.measure == doctest::Approx(2.0 * std::numbers::pi / 2.3 * cc.height()).epsilon(1e-9));

    // Off-centre ball without a claim uses the per-ball quantity.
    const auto off = make_cylinder(Weight::power(0.3, kOrigin, 2), {0.4, 0.2, 0.0}, 1.0, 0.5, CylinderKind::C);
    CHECK(cylinder_measure(off).bounds_ok);
}

TEST_CASE("K-slant condition") {
    const Weight one = Weight::constant(1.0, 2);
    const auto V = SlantCylinder::make(2, kOrigin, 0.0, kOrigin, 1.0, 1.0);
    const auto c = check_K_slant(V, 1.0, Ball{kOrigin, 1.0}, one);
    CHECK(c.pass);
    CHECK(std::abs(c.clause3_upper) < 1e-12);
    CHECK(c.clause2 == doctest::Approx(0.0));

    const auto wide = SlantCylinder::make(2, kOrigin, 0.0, kOrigin, 1.0, 1.5);
    const auto f = check_K_slant(wide, 4.0, Ball{kOrigin, 1.0}, one);
    CHECK_FALSE(f.pass);
    CHECK(f.clause1_upper == doctest::Approx(-0.5));
    CHECK_THROWS_AS(check_K_slant(V, 0.5, Ball{kOrigin, 1.0}, one), DomainError);

    // Drift clause: |y0 - x0| = 0.5, rho = 0.5, A = 1 needs s0 - t0 >= 0.25 / K.
    const auto drift = SlantCylinder::make(2, kOrigin, 0.0, {0.5, 0.0, 0.0}, 0.01, 0.5);
    const auto d = check_K_slant(drift, 2.0, Ball{{0.25, 0.0, 0.0}, 1.0}, one);
    CHECK_FALSE(d.pass);
    CHECK(d.clause3_lower == doctest::Approx(0.01 - 0.125).epsilon(1e-12));
}

TEST_CASE("prop-up stair blocks satisfy the K-slant condition with K = 32") {
    const std::vector<Weight> weights{Weight::constant(1.0, 2), Weight::power(0.3, kOrigin, 2),
                                      Weight::power(-0.2, {0.1, 0.0, 0.0}, 2)};
    const std::vector<std::pair<Point, double>> configs{
        {{0.0, 0.0, 0.0}, 0.3}, {{0.3, -0.2, 0.0}, 0.2}, {{-0.5, 0.1, 0.0}, 0.45}, {{0.05, 0.0, 0.0}, 0.9}};
    for (const auto& w : weights) {
        for (const auto& [y, rho] : configs) {
            for (double h : {1.0, 1.5, 2.0}) {
                for (double reach : {0.0, 0.99}) {
                    const Stair st = build_stair(w, y, 1.0, rho, h, {-0.6, 0.8, 0.0}, reach);
                    REQUIRE(!st.steps.empty());
                    const auto& step = st.steps.front();
                    CHECK(step.m == st.m0);
                    CHECK(st.r[st.m0 + 1] <= rho);
                    CHECK(rho < st.r[st.m0]);
                    const auto chk = check_K_slant(step.V, 32.0, step.enclosing, w);
                    CHECK(chk.pass);
                    // The lemma only needs B_{r_{m0+1}}(y_{m0+1}) inside B_rho(0).
                    CHECK(norm(st.y[st.m0 + 1], 2) + st.r[st.m0 + 1] <= rho * (1.0 + 1e-12));
                }
            }
        }
    }
    CHECK_THROWS_AS(build_stair(Weight::constant(1.0, 2), kOrigin, 1.0, 1.0, 1.0, {1.0, 0.0, 0.0}, 0.5), DomainError);
    CHECK_THROWS_AS(build_stair(Weight::constant(1.0, 2), kOrigin, 1.0, 0.5, 2.5, {1.0, 0.0, 0.0}, 0.5), DomainError);
}

TEST_CASE("parabolic boundary masks") {
    const auto c = make_cylinder(Weight::constant(1.0, 2), kOrigin, 0.0, 1.0, CylinderKind::C);
    const Grid g = cylinder_grid(c, 1.0 / 16.0);
    CHECK(g.nx == 33);
    const auto dom = cylinder_domain(c, g);
    const auto mask = parabolic_boundary(c, g);
    const int top = dom.last_level;
    CHECK(dom.first_level == 0);
    CHECK(g.time(top) == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t i = 0; i < g.spatial(); ++i) {
        const double d = norm(g.node(i), 2);
        if (d <= 1.0 + 1e-12) CHECK(mask.at(0, i));
        if (d < 1.0 - 1e-9) {
            CHECK_FALSE(mask.at(top, i));
            CHECK(dom.is(top, i, NodeKind::interior));
        }
        if (mask.at(top, i)) {
            // shell within one diagonal cell outside the sphere
            CHECK(d >= 1.0 - 1e-9);
            CHECK(d <= 1.0 + std::sqrt(2.0) / 16.0 + 1e-12);
        }
    }

    const auto q = c.with_kind(CylinderKind::Q);
    const Grid gq = cylinder_grid(q, 1.0 / 8.0);
    const auto mq = parabolic_boundary(q, gq);
    CHECK(gq.time(0) == doctest::Approx(-1.0));
    CHECK(gq.time(gq.nt - 1) == doctest::Approx(1.0));
    CHECK(mq.at(0, gq.flat({8, 8, 0})));
    CHECK_FALSE(mq.at(gq.nt - 1, gq.flat({8, 8, 0})));

    // Drifting tube: shell nodes stay within one cell of the moving sphere.
    const auto V = SlantCylinder::make(2, {-0.3, 0.0, 0.0}, 0.0, {0.4, 0.2, 0.0}, 0.5, 0.3);
    const double h = 1.0 / 64.0;
    const Grid gs = slant_grid(V, h, 1.0 / 256.0);
    const auto ds = slant_domain(V, gs);
    const double speed = norm(V.drift(), 2);
    std::size_t lateral = 0;
    for (int k = ds.first_level + 1; k <= ds.last_level; ++k) {
        const Point a = V.axis(gs.time(k));
        for (std::size_t i = 0; i < gs.spatial(); ++i) {
            const double d = distance(gs.node(i), a, 2);
            if (ds.is(k, i, NodeKind::boundary)) {
                ++lateral;
                CHECK(d >= V.rho * (1.0 - 1e-12));
                CHECK(d <= V.rho + std::sqrt(2.0) * h + speed * gs.tau + 1e-12);
            } else if (ds.is(k, i, NodeKind::interior)) {
                CHECK(d < V.rho);
            }
        }
    }
    CHECK(lateral > 0);

    // Too coarse to resolve a diameter.
    const auto tiny = SlantCylinder::make(2, kOrigin, 0.0, kOrigin, 1.0, 0.05);
    CHECK_THROWS_AS(slant_domain(tiny, slant_grid(tiny, 0.1)), DomainError);
}

TEST_CASE("grid function binary round trip") {
    Grid g;
    g.n = 2;
    g.h = 0.125;
    g.nx = 9;
    g.tau = 0.01;
    g.nt = 3;
    g.lower = {-0.5, -0.5, 0.0};
    GridFunction u(g);
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = std::sin(0.1 * static_cast<double>(i));
    const auto path = std::filesystem::temp_directory_path() / "wrlab_grid_roundtrip.bin";
    write_grid_function(path.string(), u);
    const GridFunction v = read_grid_function(path.string());
    CHECK(v.grid.nx == 9);
    CHECK(v.grid.nt == 3);
    CHECK(v.grid.h == 0.125);
    CHECK(v.values == u.values);
    std::filesystem::remove(path);
}

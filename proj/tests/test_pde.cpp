#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "wrlab/pde.hpp"

using namespace wrlab;

namespace {
const Point kOrigin{0.0, 0.0, 0.0};

WeightedCylinder unit_c(const Weight& w) { return make_cylinder(w, kOrigin, 0.0, 1.0, CylinderKind::C); }

Mat dominant(double a11, double a22, double a12) {
    Mat a{};
    entry(a, 0, 0) = a11;
    entry(a, 1, 1) = a22;
    entry(a, 0, 1) = a12;
    entry(a, 1, 0) = a12;
    return a;
}
}  // namespace

TEST_CASE("coefficient fields") {
    const auto f = CoefficientField::sample_dominant(2, {-1.0, -1.0, 0.0}, 0.5, 4, -1.0, 0.25, 4, 7);
    CHECK(f.dominance_margin() > 0.0);
    CHECK(f.min_eigenvalue() >= 0.55 - 1e-12);
    CHECK(f.max_eigenvalue() <= 2.9 + 1e-12);
    CHECK(f.nu() <= f.min_eigenvalue());
    CHECK(f.nu() * f.max_eigenvalue() <= 1.0 + 1e-12);
    CHECK(&f.at({-0.9, -0.9, 0.0}, -0.9) == &f.at({-0.6, -0.6, 0.0}, -0.8));
    CHECK(&f.at({-0.9, -0.9, 0.0}, -0.9) != &f.at({0.6, -0.6, 0.0}, -0.9));
    CHECK(f.time_block(-0.9) == 0);
    CHECK(f.time_block(0.5) == 3);
    const auto g = CoefficientField::sample_dominant(2, {-1.0, -1.0, 0.0}, 0.5, 4, -1.0, 0.25, 4, 7);
    CHECK(g.at({0.1, 0.2, 0.0}, -0.3) == f.at({0.1, 0.2, 0.0}, -0.3));
    CHECK_THROWS_AS(CoefficientField::constant(2, [] {
                        Mat a{};
                        entry(a, 0, 0) = 1.0;
                        entry(a, 1, 1) = 1.0;
                        entry(a, 0, 1) = 0.5;
                        return a;
                    }()),
                    DomainError);
}

TEST_CASE("cross stencil") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat a = dominant(1.5 + 0.5 * u(rng), 1.5 + 0.5 * u(rng), 0.45 * u(rng));
        const double h = 0.1;
        const auto st = second_order_stencil(a, 2, h);
        for (const auto& e : st) {
            if (e.offset != std::array<int, 3>{0, 0, 0}) CHECK(e.coeff >= 0.0);
        }
        // Exact on x^T B x: sum a_ij D_ij = 2 a : B.
        const double b11 = u(rng), b22 = u(rng), b12 = u(rng);
        const Point x{u(rng), u(rng), 0.0};
        auto q = [&](double x0, double x1) { return b11 * x0 * x0 + 2.0 * b12 * x0 * x1 + b22 * x1 * x1; };
        double s = 0.0;
        for (const auto& e : st) s += e.coeff * q(x[0] + e.offset[0] * h, x[1] + e.offset[1] * h);
        const double exact = 2.0 * (entry(a, 0, 0) * b11 + entry(a, 1, 1) * b22 + 2.0 * entry(a, 0, 1) * b12);
        CHECK(s == doctest::Approx(exact).epsilon(1e-10));
    }
}

TEST_CASE("node weights near singular points") {
    const Weight w = Weight::power(0.2, kOrigin, 2);
    Grid g;
    g.n = 2;
    g.h = 0.125;
    g.nx = 9;
    g.lower = {-0.5, -0.5, 0.0};
    g.tau = 0.01;
    g.nt = 2;
    const auto nw = node_weights(g, w);
    const std::size_t c = g.flat({4, 4, 0});
    // Cell average of |x|^0.2 over the centred square, by symmetry in polar form.
    const auto gl = oracle::gauss_legendre(20);
    const double half = 0.5 * g.h;
    const double integral =
        8.0 * oracle::composite(
                  [&](double th) { return std::pow(half / std::cos(th), 2.2) / 2.2; }, 0.0, std::numbers::pi / 4.0,
                  8, gl);
    CHECK(nw[c] == doctest::Approx(integral / (g.h * g.h)).epsilon(1e-7));
    CHECK(nw[g.flat({5, 4, 0})] == doctest::Approx(std::pow(0.125, 0.2)).epsilon(1e-14));
    // A non-integrable singularity is rejected.
    CHECK_THROWS_AS(node_weights(g, Weight::power(-2.5, kOrigin, 2)), Error);
}

TEST_CASE("apply_L against a hand-assembled stencil") {
    const Weight w = Weight::power(0.2, kOrigin, 2);
    const auto cyl = unit_c(w);
    const Grid g = cylinder_grid(cyl, 0.25, 1.0 / 8.0);
    REQUIRE(g.nx == 9);
    REQUIRE(g.nt >= 9);
    const auto dom = cylinder_domain(cyl, g);
    const auto nw = node_weights(g, w);
    const auto u = sample(g, [](const Point& x, double t) { return x[0] * x[0] + x[1] * x[1] + t * std::cos(x[0]); });
    const auto Lu = apply_L(u, dom, nw, CoefficientField::identity(2));
    const double h = g.h;
    std::size_t checked = 0;
    for (int k = 1; k < g.nt; ++k) {
        for (int a = 1; a < 8; ++a) {
            for (int b = 1; b < 8; ++b) {
                const std::size_t i = g.flat({a, b, 0});
                if (!dom.is(k, i, NodeKind::interior)) {
                    CHECK(Lu.at(k, i) == 0.0);
                    continue;
                }
                const double lap = (u.at(k, g.flat({a + 1, b, 0})) + u.at(k, g.flat({a - 1, b, 0})) +
                                    u.at(k, g.flat({a, b + 1, 0})) + u.at(k, g.flat({a, b - 1, 0})) -
                                    4.0 * u.at(k, i)) /
                                   (h * h);
                const double ref = (u.at(k, i) - u.at(k - 1, i)) / g.tau - nw[i] * lap;
                CHECK(Lu.at(k, i) == doctest::Approx(ref).epsilon(1e-12));
                ++checked;
            }
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("implicit solver") {
    const Weight one = Weight::constant(1.0, 2);
    const auto cyl = unit_c(one);
    SUBCASE("quadratic manufactured solution is reproduced") {
        const Grid g = cylinder_grid(cyl, 1.0 / 16.0);
        const auto dom = cylinder_domain(cyl, g);
        const auto nw = node_weights(g, one);
        auto exact = [&](int k, std::size_t i) {
            const Point x = g.node(i);
            return x[0] * x[0] + x[1] * x[1] + 4.0 * g.time(k);
        };
        const auto [u, st] = solve_dirichlet(
            dom, nw, CoefficientField::identity(2), [](int, std::size_t) { return 0.0; }, exact);
        CHECK(st.factorizations == 1);
        CHECK(st.max_residual <= 1e-10);
        CHECK(st.levels == g.nt);
        double err = 0.0;
        for (int k = 0; k < g.nt; ++k) {
            for (std::size_t i = 0; i < g.spatial(); ++i) {
                if (dom.kind[g.index(k, i)] != NodeKind::outside) err = std::max(err, std::abs(u.at(k, i) - exact(k, i)));
            }
        }
        CHECK(err <= 1e-9);
    }
    SUBCASE("variable weight and coefficients, exact discrete data") {
        const Weight w = Weight::power(0.3, kOrigin, 2);
        const auto cw = unit_c(w);
        const Grid g = cylinder_grid(cw, 1.0 / 16.0);
        const auto dom = cylinder_domain(cw, g);
        const auto nw = node_weights(g, w);
        const auto a = CoefficientField::sample_dominant(2, g.lower, 0.5, 4, g.t0, 0.3, 4, 11);
        auto exact = [&](int k, std::size_t i) {
            const Point x = g.node(i);
            return 0.7 * x[0] * x[0] - 0.4 * x[0] * x[1] + 1.3 * x[1] * x[1] + g.time(k);
        };
        auto f = [&](int k, std::size_t i) {
            const Mat& m = a.at(g.node(i), g.time(k));
            return 1.0 - nw[i] * 2.0 * (entry(m, 0, 0) * 0.7 + entry(m, 1, 1) * 1.3 - 2.0 * entry(m, 0, 1) * 0.2);
        };
        const auto [u, st] = solve_dirichlet(dom, nw, a, f, exact);
        CHECK(st.factorizations >= 2);
        double err = 0.0;
        for (int k = 0; k < g.nt; ++k) {
            for (std::size_t i = 0; i < g.spatial(); ++i) {
                if (dom.is(k, i, NodeKind::interior)) err = std::max(err, std::abs(u.at(k, i) - exact(k, i)));
            }
        }
        CHECK(err <= 1e-9);
        // The residual of the assembled operator matches the data.
        const auto Lu = apply_L(u, dom, nw, a);
        double rerr = 0.0;
        for (int k = 1; k < g.nt; ++k) {
            for (std::size_t i = 0; i < g.spatial(); ++i) {
                if (dom.is(k, i, NodeKind::interior)) rerr = std::max(rerr, std::abs(Lu.at(k, i) - f(k, i)));
            }
        }
        CHECK(rerr <= 1e-7);
    }
    SUBCASE("second order on a smooth solution") {
        std::vector<double> errs;
        for (double h : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
            const Grid g = cylinder_grid(cyl, h);
            const auto dom = cylinder_domain(cyl, g);
            const auto nw = node_weights(g, one);
            auto ex = [&](const Point& x, double t) { return std::exp(t) * std::sin(x[0] + 0.5) * std::cos(0.7 * x[1]); };
            auto f = [&](int k, std::size_t i) {
                const Point x = g.node(i);
                return ex(x, g.time(k)) * (1.0 + 1.0 + 0.49);
            };
            auto bd = [&](int k, std::size_t i) { return ex(g.node(i), g.time(k)); };
            double err = 0.0;
            solve_levels(dom, nw, CoefficientField::identity(2), f, bd, [&](int k, const std::vector<double>& v) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (dom.is(k, i, NodeKind::interior)) err = std::max(err, std::abs(v[i] - bd(k, i)));
                }
            });
            errs.push_back(err);
        }
        CHECK(std::log2(errs[0] / errs[1]) >= 1.8);
        CHECK(std::log2(errs[1] / errs[2]) >= 1.9);
    }
}

TEST_CASE("boundary data on the sphere") {
    SUBCASE("quadratics are exact and shell values off the sphere are ignored") {
        const Weight w = Weight::power(0.3, kOrigin, 2);
        const auto cw = unit_c(w);
        const Grid g = cylinder_grid(cw, 1.0 / 12.0);
        const auto dom = cylinder_domain(cw, g);
        const auto nw = node_weights(g, w);
        const auto a = CoefficientField::sample_dominant(2, g.lower, 0.5, 4, g.t0, 0.3, 4, 5);
        auto ex = [](const Point& x, double t) { return 0.7 * x[0] * x[0] - 0.4 * x[0] * x[1] + 1.3 * x[1] * x[1] + t; };
        auto f = [&](int k, std::size_t i) {
            const Mat& m = a.at(g.node(i), g.time(k));
            return 1.0 - nw[i] * 2.0 * (entry(m, 0, 0) * 0.7 + entry(m, 1, 1) * 1.3 - 2.0 * entry(m, 0, 1) * 0.2);
        };
        auto g_at = [&](int k, const Point& x) { return ex(x, g.time(k)); };
        // Shell nodes strictly outside the closed ball carry junk.
        auto g_node = [&](int k, std::size_t i) {
            const Point x = g.node(i);
            return k == dom.first_level || norm(x, 2) <= 1.0 + 1e-9 ? ex(x, g.time(k)) : 1e3;
        };
        GridFunction u(g, 0.0);
        const std::size_t S = g.spatial();
        solve_levels(dom, nw, a, f, g_node, g_at,
                     [&](int k, const std::vector<double>& v) { std::copy(v.begin(), v.end(), &u.values[k * S]); });
        double err = 0.0;
        for (int k = 0; k < g.nt; ++k) {
            for (std::size_t i = 0; i < S; ++i) {
                if (dom.is(k, i, NodeKind::interior)) err = std::max(err, std::abs(u.at(k, i) - ex(g.node(i), g.time(k))));
            }
        }
        CHECK(err <= 1e-9);
        const auto Lu = apply_L(u, dom, nw, a, g_at);
        double rerr = 0.0;
        for (int k = 1; k < g.nt; ++k) {
            for (std::size_t i = 0; i < S; ++i) {
                if (dom.is(k, i, NodeKind::interior)) rerr = std::max(rerr, std::abs(Lu.at(k, i) - f(k, i)));
            }
        }
        CHECK(rerr <= 1e-7);
    }
    SUBCASE("zero data on the sphere converges at second order") {
        const Weight one = Weight::constant(1.0, 2);
        const auto cyl = unit_c(one);
        // u = e^t (1 - |x|^2) cos x_0 vanishes on the sphere.
        auto ex = [](const Point& x, double t) {
            return std::exp(t) * (1.0 - x[0] * x[0] - x[1] * x[1]) * std::cos(x[0]);
        };
        std::vector<double> sw, shell;
        for (double h : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
            const Grid g = cylinder_grid(cyl, h);
            const auto dom = cylinder_domain(cyl, g);
            const auto nw = node_weights(g, one);
            auto f = [&](int k, std::size_t i) {
                const Point x = g.node(i);
                const double phi = 1.0 - x[0] * x[0] - x[1] * x[1];
                return std::exp(g.time(k)) *
                       (2.0 * phi * std::cos(x[0]) + 4.0 * std::cos(x[0]) - 4.0 * x[0] * std::sin(x[0]));
            };
            auto bd = [&](int k, std::size_t i) { return k == dom.first_level ? ex(g.node(i), g.time(k)) : 0.0; };
            for (int mode = 0; mode < 2; ++mode) {
                double err = 0.0;
                auto on = [&](int k, const std::vector<double>& v) {
                    for (std::size_t i = 0; i < v.size(); ++i) {
                        if (dom.is(k, i, NodeKind::interior)) err = std::max(err, std::abs(v[i] - ex(g.node(i), g.time(k))));
                    }
                };
                if (mode == 0) {
                    solve_levels(dom, nw, CoefficientField::identity(2), f, bd, [](int, const Point&) { return 0.0; }, on);
                    sw.push_back(err);
                } else {
                    solve_levels(dom, nw, CoefficientField::identity(2), f, bd, on);
                    shell.push_back(err);
                }
            }
        }
        CHECK(std::log2(sw[0] / sw[1]) >= 1.8);
        CHECK(std::log2(sw[1] / sw[2]) >= 1.8);
        // Zero on the shell nodes moves the boundary outward by up to h.
        CHECK(shell[2] > 5.0 * sw[2]);
    }
}

TEST_CASE("discrete comparison principle") {
    const Weight w = Weight::power(-0.3, {0.1, 0.0, 0.0}, 2);
    const auto cyl = unit_c(w);
    const Grid g = cylinder_grid(cyl, 1.0 / 8.0);
    const auto dom = cylinder_domain(cyl, g);
    const auto nw = node_weights(g, w);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = CoefficientField::sample_dominant(2, g.lower, 0.5, 4, g.t0, 0.5, 3, 100 + trial);
        GridFunction f1(g), f2(g), g1(g), g2(g);
        for (std::size_t j = 0; j < g.size(); ++j) {
            f1.values[j] = u(rng);
            f2.values[j] = f1.values[j] + 0.5 * (u(rng) + 1.0);
            g1.values[j] = u(rng);
            g2.values[j] = g1.values[j] + 0.5 * (u(rng) + 1.0);
        }
        const auto [u1, s1] = solve_dirichlet(dom, nw, a, [&](int k, std::size_t i) { return f1.at(k, i); },
                                              [&](int k, std::size_t i) { return g1.at(k, i); });
        const auto [u2, s2] = solve_dirichlet(dom, nw, a, [&](int k, std::size_t i) { return f2.at(k, i); },
                                              [&](int k, std::size_t i) { return g2.at(k, i); });
        double worst = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (dom.kind[j] != NodeKind::outside) worst = std::max(worst, u1.values[j] - u2.values[j]);
        }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("upper contact sets") {
    const Weight one = Weight::constant(1.0, 2);
    const auto cyl = unit_c(one);
    const Grid g = cylinder_grid(cyl, 0.25, 1.0 / 7.0);
    REQUIRE(g.nx == 9);
    REQUIRE(g.nt == 8);
    const auto dom = cylinder_domain(cyl, g);

    const auto cap = sample(g, [](const Point& x, double t) { return -(x[0] * x[0] + x[1] * x[1]) + t; });
    const auto mc = upper_contact_set(cap, dom);
    CHECK(mc.count() == dom.count(NodeKind::interior) + dom.count(NodeKind::boundary));

    const auto cup = sample(g, [](const Point& x, double) { return x[0] * x[0] + x[1] * x[1]; });
    const auto mu = upper_contact_set(cup, dom);
    for (int k = 0; k < g.nt; ++k) {
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            if (dom.is(k, i, NodeKind::interior)) CHECK_FALSE(mu.at(k, i));
        }
    }
    CHECK(mu.count() > 0);

    // Against the brute-force oracle on random data and on solutions.
    const auto nw = node_weights(g, one);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        GridFunction u(g);
        if (trial < 3) {
            for (auto& v : u.values) v = ud(rng);
        } else {
            GridFunction f(g);
            for (auto& v : f.values) v = 1.0 + ud(rng);
            u = solve_dirichlet(dom, nw, CoefficientField::identity(2), [&](int k, std::size_t i) { return f.at(k, i); },
                                [](int, std::size_t) { return 0.0; })
                    .first;
        }
        const auto fast = upper_contact_set(u, dom);
        const auto slow = upper_contact_set_bruteforce(u, dom);
        CHECK(fast.flags == slow.flags);
        CHECK(fast.count() > 0);
    }
}

TEST_CASE("ABP check") {
    const Weight one = Weight::constant(1.0, 2);
    const auto cyl = unit_c(one);
    const Grid g = cylinder_grid(cyl, 1.0 / 8.0);
    const auto dom = cylinder_domain(cyl, g);
    const auto nw = node_weights(g, one);
    const auto a = CoefficientField::identity(2);
    const auto u =
        solve_dirichlet(dom, nw, a, [](int, std::size_t) { return 1.0; }, [](int, std::size_t) { return 0.0; }).first;
    const auto r = abp_check(u, dom, nw, nw, a, 1.0);
    CHECK(r.sup_boundary == 0.0);
    CHECK(r.excess > 0.0);
    CHECK(r.core > 0.0);
    CHECK(r.fitted_N0 > 0.0);
    CHECK_FALSE(r.violation);
    CHECK(abp_report(r).passed());

    GridFunction u3 = u;
    for (auto& v : u3.values) v *= 3.0;
    const auto r3 = abp_check(u3, dom, nw, nw, a, 1.0);
    CHECK(r3.fitted_N0 == doctest::Approx(r.fitted_N0).epsilon(1e-9));
    GridFunction up = u;
    for (auto& v : up.values) v += 0.25;
    const auto rp = abp_check(up, dom, nw, nw, a, 1.0);
    CHECK(rp.fitted_N0 == doctest::Approx(r.fitted_N0).epsilon(1e-9));
}

TEST_CASE("barrier") {
    const Weight w = Weight::power(0.3, kOrigin, 2);
    const auto V = SlantCylinder::make(2, {-0.2, 0.1, 0.0}, 0.0, {0.1, 0.0, 0.0}, 0.3, 0.3);
    const Ball B{{0.0, 0.0, 0.0}, 0.8};
    const auto a = CoefficientField::sample_dominant(2, {-1.0, -1.0, 0.0}, 0.5, 4, 0.0, 0.1, 3, 4);
    const Grid g = slant_grid(V, 0.3 / 16.0, 0.3 / 63.0);
    const BarrierModel bm(V, 4.0, B, w, a, g);
    CHECK(bm.lambda() == doctest::Approx(bm.N1() * 16.0 * bm.w_avg() / 0.09).epsilon(1e-12));
    CHECK(bm.N1() == doctest::Approx(bm.N_tilde() * bm.N_tilde() / (16.0 * bm.nu())).epsilon(1e-12));
    const Point ell = V.drift();
    std::size_t nodes = 0;
    for (int k = 0; k < g.nt; ++k) {
        const double t = g.time(k) - V.t0;
        if (t < 0.0 || t > 0.3) continue;
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            Point x = g.node(i);
            for (int d = 0; d < 2; ++d) x[d] -= V.x0[d];
            const auto p = bm.eval(x, t);
            if (p.Phi < 0.0) continue;
            ++nodes;
            CHECK(p.quadratic <= 1e-12);
            CHECK(p.quadratic_bound <= 1e-12);
            CHECK(p.quadratic <= p.quadratic_bound + 1e-12);
            CHECK(p.Lv <= p.Lv_bound + 1e-9 * std::abs(p.Lv_bound) + 1e-12);
            CHECK(p.v == doctest::Approx(barrier_value(0.3, bm.lambda(), ell, x, t, 2)).epsilon(1e-14));
        }
    }
    CHECK(nodes > 1000);

    // Exact L v against centred differences of v with frozen a and w.
    const Point x{0.05, 0.12, 0.0};
    const double t = 0.1;
    const auto p = bm.eval(x, t);
    const double d = 1e-4;
    auto v = [&](double x0, double x1, double s) { return barrier_value(0.3, bm.lambda(), ell, {x0, x1, 0.0}, s, 2); };
    const double vt = (v(x[0], x[1], t + d) - v(x[0], x[1], t - d)) / (2 * d);
    const double v11 = (v(x[0] + d, x[1], t) - 2 * v(x[0], x[1], t) + v(x[0] - d, x[1], t)) / (d * d);
    const double v22 = (v(x[0], x[1] + d, t) - 2 * v(x[0], x[1], t) + v(x[0], x[1] - d, t)) / (d * d);
    const double v12 = (v(x[0] + d, x[1] + d, t) - v(x[0] + d, x[1] - d, t) - v(x[0] - d, x[1] + d, t) +
                        v(x[0] - d, x[1] - d, t)) /
                       (4 * d * d);
    Point xo = x;
    for (int k = 0; k < 2; ++k) xo[k] += V.x0[k];
    const Mat& m = a.at(xo, t + V.t0);
    const double Lv = vt - w(xo) * (entry(m, 0, 0) * v11 + entry(m, 1, 1) * v22 + 2 * entry(m, 0, 1) * v12);
    CHECK(p.Lv == doctest::Approx(Lv).epsilon(1e-5));
}

TEST_CASE("weighted norms") {
    const Weight one = Weight::constant(1.0, 2);
    const auto cyl = unit_c(one);
    const Grid g = cylinder_grid(cyl, 1.0 / 32.0);
    const auto dom = cylinder_domain(cyl, g);
    const GridFunction ones(g, 1.0);
    CHECK(weighted_norm(ones, 1.0, node_weights(g, one), dom) == doctest::Approx(std::numbers::pi).epsilon(0.02));
    CHECK(weighted_norm(ones, 2.0, {}, dom) == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(0.02));

    const auto q = sample(g, [](const Point& x, double t) { return x[0] * x[0] + 3.0 * x[0] * x[1] + t * t; });
    const auto H = hessian_frobenius(q, dom);
    const auto T = time_derivative(q, dom);
    for (int k = 1; k < g.nt; ++k) {
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            if (!dom.is(k, i, NodeKind::interior)) continue;
            CHECK(H.at(k, i) == doctest::Approx(std::sqrt(4.0 + 2.0 * 9.0)).epsilon(1e-9));
            CHECK(T.at(k, i) == doctest::Approx(2.0 * g.time(k) - g.tau).epsilon(1e-9));
        }
    }
    CHECK_THROWS_AS(weighted_norm(ones, 0.0, {}, dom), DomainError);
}

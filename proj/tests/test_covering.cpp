#include <doctest.h>

#include <algorithm>
#include <random>

#include "wrlab/covering.hpp"

using namespace wrlab;

namespace {
const Point kOrigin{0.0, 0.0, 0.0};

std::shared_ptr<const CellLattice> lattice(const Weight& w, int cs = 32, int ct = 64) {
    return CellLattice::build(make_cylinder(w, kOrigin, 0.0, 1.0, CylinderKind::C), cs, ct, 3);
}

/// Density by explicit cell-by-cell time overlap, no prefix sums.
double density_oracle(const CellSet& g, const CandidateCylinder& c) {
    const CellLattice& L = *g.lattice;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < L.spatial(); ++i) {
        if (distance(L.centre(i), c.x, L.n) > c.rho * (1.0 + 1e-12)) continue;
        den += L.cell_w[i] * c.height;
        for (int k = 0; k < L.cells_time; ++k) {
            const double lo = std::max(L.t_lower + k * L.dt, c.s - c.height);
            const double hi = std::min(L.t_lower + (k + 1) * L.dt, c.s);
            if (hi > lo && g.mask[L.index(k, i)]) num += L.cell_w[i] * (hi - lo);
        }
    }
    return num / den;
}

CandidateCylinder cyl(double x, double y, double s, double rho, double h) {
    CandidateCylinder c;
    c.x = {x, y, 0.0};
    c.s = s;
    c.rho = rho;
    c.height = h;
    return c;
}
}  // namespace

TEST_CASE("candidate densities") {
    const auto L = lattice(Weight::constant(1.0, 2));
    const auto cands = candidate_lattice(L);
    CHECK(cands.levels == 4);

    CellSet full = CellSet::empty(L);
    for (int k = 0; k < L->cells_time; ++k) {
        for (std::size_t i = 0; i < L->spatial(); ++i) full.mask[L->index(k, i)] = 1;
    }
    const auto all = candidate_cylinders(full, 0.9, cands);
    CHECK(all.size() == cands.all.size());
    for (const auto& c : all) CHECK(c.density == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(candidate_cylinders(CellSet::empty(L), 0.5, cands).empty());

    // One lattice cylinder as Gamma.
    const auto it = std::find_if(cands.all.begin(), cands.all.end(), [](const CandidateCylinder& c) {
        return c.level == 2 && c.x[0] == -0.5 && c.x[1] == 0.0;
    });
    REQUIRE(it != cands.all.end());
    CellSet one = CellSet::empty(L);
    rasterize_outer(one, *it);
    const auto q = candidate_cylinders(one, 0.5, cands);
    const auto self = std::find_if(q.begin(), q.end(), [&](const CandidateCylinder& c) {
        return c.x == it->x && c.s == it->s && c.rho == it->rho;
    });
    REQUIRE(self != q.end());
    CHECK(self->density == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& c : q) {
        CHECK(c.density == doctest::Approx(density_oracle(one, c)).epsilon(1e-12));
        CHECK_FALSE(cylinders_disjoint(c, *it, 2));
    }
    // A random sample of all candidates against the oracle.
    const auto dens_all = candidate_cylinders(one, 1e-9, cands);
    for (std::size_t i = 0; i < dens_all.size(); i += 97) {
        CHECK(dens_all[i].density == doctest::Approx(density_oracle(one, dens_all[i])).epsilon(1e-12));
    }
}

TEST_CASE("greedy disjoint selection") {
    auto sel = greedy_disjoint_selection({cyl(0.5, 0.0, 0.0, 0.5, 0.25), cyl(-0.4, 0.0, 0.0, 0.25, 0.0625)}, 2);
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].rho == 0.5);
    sel = greedy_disjoint_selection({cyl(0.0, 0.0, 0.0, 0.45, 0.2), cyl(0.1, 0.0, 0.0, 0.5, 0.25)}, 2);
    REQUIRE(sel.size() == 1);
    CHECK(sel[0].rho == 0.5);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<CandidateCylinder> cs;
        for (int i = 0; i < 50; ++i) {
            const double rho = std::ldexp(0.5, -static_cast<int>(u(rng) * 3.0));
            cs.push_back(cyl(2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0, u(rng), rho, rho * rho));
        }
        const auto s = greedy_disjoint_selection(cs, 2);
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t j = i + 1; j < s.size(); ++j) CHECK(cylinders_disjoint(s[i], s[j], 2));
        }
        for (const auto& c : cs) {
            bool touches = false;
            for (const auto& t : s) touches = touches || !cylinders_disjoint(c, t, 2) || (c.x == t.x && c.s == t.s);
            CHECK(touches);
        }
        const auto audit = audit_selection(cs, s, 2);
        CHECK(audit.disjoint);
        CHECK(audit.maximal);
    }
}

TEST_CASE("E sets") {
    const auto L = lattice(Weight::constant(1.0, 2));
    // rho = 1/2: height 1/4 = 16 time cells.
    const auto c = cyl(0.0, 0.0, -0.5, 0.5, 0.25);
    CellSet te = CellSet::empty(L), he = CellSet::empty(L);
    build_E_sets({c}, 0.999, 3.0, te, he);
    CHECK(he.measure() / te.measure() == doctest::Approx(2.0).epsilon(1e-12));

    CellSet te2 = CellSet::empty(L), he2 = CellSet::empty(L);
    build_E_sets({c}, 0.5, 3.0, te2, he2);
    auto ball_sum = [&](double rho) {
        double s = 0.0;
        for (auto i : L->footprint(c.x, rho, false)) s += L->cell_w[i];
        return s;
    };
    CHECK(te2.measure() / te.measure() == doctest::Approx(ball_sum(0.25) / ball_sum(0.4995)).epsilon(1e-12));

    CellSet e1 = CellSet::empty(L), e2 = CellSet::empty(L);
    build_E_sets({}, 0.5, 3.0, e1, e2);
    CHECK(e1.count() == 0);
    CHECK(e2.count() == 0);
    CHECK_THROWS_AS(build_E_sets({c}, 1.0, 3.0, e1, e2), DomainError);
}

TEST_CASE("covering conclusions") {
    for (const Weight& w : {Weight::constant(1.0, 2), Weight::power(0.2, kOrigin, 2)}) {
        const auto L = lattice(w);
        const auto cands = candidate_lattice(L);
        // Away from the reference's lateral edge, where the smallest admissible
        // radius leaves an uncovered layer a cell thick.
        const auto it = std::find_if(cands.all.begin(), cands.all.end(), [](const CandidateCylinder& c) {
            return c.level == 1 && c.x[0] == 0.0 && c.x[1] == 0.0;
        });
        REQUIRE(it != cands.all.end());
        CellSet one = CellSet::empty(L);
        rasterize_outer(one, *it);
        const auto res = run_covering(one, 0.5, 0.9, 3.0, cands);
        CHECK(res.xi1 == 0.5);
        const Report rep = verify_covering(one, res, 2.0);
        for (const auto& ch : rep.checks) {
            INFO(ch.name);
            CHECK(ch.pass);
        }

        const auto empty = run_covering(CellSet::empty(L), 0.5, 0.9, 3.0, cands);
        CHECK(verify_covering(CellSet::empty(L), empty, 2.0).passed());

        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const CellSet g = random_gamma(L, cands, 5 + static_cast<int>(seed) * 4, seed);
            const auto r = run_covering(g, 0.5, 0.9, 3.0, cands);
            const Report v = verify_covering(g, r, 2.0);
            for (const auto& ch : v.checks) {
                INFO(ch.name, " ", ch.detail);
                CHECK(ch.pass);
            }
        }
    }
}

TEST_CASE("rasterization refinement") {
    const Weight one = Weight::constant(1.0, 2);
    const auto coarse = lattice(one, 32, 64);
    const auto fine = lattice(one, 64, 128);
    const auto cc = candidate_lattice(coarse);
    const auto cf = candidate_lattice(fine);
    std::vector<CandidateCylinder> parts;
    const CellSet gc = random_gamma(coarse, cc, 8, 5, &parts);
    CellSet gf = CellSet::empty(fine);
    for (const auto& p : parts) rasterize_outer(gf, p);
    const auto rc = run_covering(gc, 0.5, 0.9, 3.0, cc);
    const auto rf = run_covering(gf, 0.5, 0.9, 3.0, cf);
    CHECK(rf.w_gamma == doctest::Approx(rc.w_gamma).epsilon(0.05));
    CHECK(rf.w_tildeE == doctest::Approx(rc.w_tildeE).epsilon(0.05));
    CHECK(rf.w_hatE == doctest::Approx(rc.w_hatE).epsilon(0.05));
    const Report vc = verify_covering(gc, rc, 1.0);
    const Report vf = verify_covering(gf, rf, 1.0);
    REQUIRE(vc.checks.size() == vf.checks.size());
    for (std::size_t i = 0; i < vc.checks.size(); ++i) CHECK(vc.checks[i].pass == vf.checks[i].pass);
}

TEST_CASE("derived constants") {
    const auto c = derived_constants(2, 1.0, 0.5);
    CHECK(c.xi0 == doctest::Approx(1.0 + 0.25 / 81.0).epsilon(1e-15));
    CHECK(c.identity_residual <= 1e-12);
    CHECK(c.l0 == doctest::Approx((3.0 * c.xi0 + 1.0) / (c.xi0 - 1.0)).epsilon(1e-9));
    const auto near = derived_constants(2, 1.0, 1.0 - 1e-9);
    CHECK(near.xi0 - 1.0 < 1e-11);
    CHECK(near.l0 > 1e11);
    CHECK(near.identity_residual <= 1e-12);
    CHECK_THROWS_AS(derived_constants(0, 1.0, 0.5), DomainError);
    CHECK_THROWS_AS(derived_constants(2, 0.5, 0.5), DomainError);
    CHECK_THROWS_AS(derived_constants(2, 1.0, 1.0), DomainError);
}

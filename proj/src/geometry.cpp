#include "wrlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace wrlab {

bool WeightedCylinder::contains(const Point& x, double t) const {
    return distance(x, y_, dim()) < r_ && t > t_begin() && t < t_end();
}

WeightedCylinder WeightedCylinder::with_kind(CylinderKind k) const { return {k, y_, s_, r_, h_, w_}; }

std::string WeightedCylinder::describe() const {
    std::ostringstream os;
    os << (kind_ == CylinderKind::C ? "C" : "Q") << "(y=" << format_point(y_, dim()) << ",s=" << format_double(s_)
       << ",r=" << format_double(r_) << ",h=" << format_double(h_) << ")";
    return os.str();
}

WeightedCylinder make_cylinder(const Weight& w, const Point& y, double s, double r, CylinderKind kind,
                               const QuadratureSpec& spec) {
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("cylinder radius must be positive");
    if (!std::isfinite(s)) throw DomainError("cylinder time must be finite");
    const int n = w.dim();
    const double avg = ball_average(w, Ball{y, r}, -static_cast<double>(n), spec);
    const double h = r * r * std::pow(avg, 1.0 / n);
    if (!(h > 0.0) || !std::isfinite(h)) throw NumericalError("cylinder height is not a positive number");
    return {kind, y, s, r, h, w};
}

WeightedCylinder make_cylinder_with_height(const Weight& w, const Point& y, double s, double r, double h,
                                           CylinderKind kind) {
    if (!(r > 0.0) || !(h > 0.0)) throw DomainError("cylinder radius and height must be positive");
    return {kind, y, s, r, h, w};
}

CylinderMeasure cylinder_measure(const WeightedCylinder& cyl, const QuadratureSpec& spec) {
    const int n = cyl.dim();
    CylinderMeasure m;
    const double wb = weight_measure(cyl.weight(), cyl.ball(), spec);
    const double c_measure = wb * cyl.height();
    m.measure = cyl.kind() == CylinderKind::C ? c_measure : 2.0 * c_measure;
    m.q_to_c = cyl.kind() == CylinderKind::C ? 2.0 : m.measure / c_measure;
    const double base = unit_ball_volume(n) * std::pow(cyl.radius(), n + 2);
    // (w)_B * ((w^{-n})_B)^{1/n}, the per-ball A_{1+1/n} quantity.
    double a = wb / (unit_ball_volume(n) * std::pow(cyl.radius(), n)) * cyl.inverse_scale();
    if (const auto& claim = cyl.weight().claimed_ap_class(); claim && std::abs(claim->p - (1.0 + 1.0 / n)) < 1e-12) {
        a = std::max(a, claim->bound);
    }
    m.a_used = a;
    m.lower = base;
    m.upper = a * base;
    m.bounds_ok = c_measure >= base * (1.0 - 1e-9) && c_measure <= m.upper * (1.0 + 1e-9);
    return m;
}

SlantCylinder SlantCylinder::make(int n, const Point& x0, double t0, const Point& y0, double s0, double rho) {
    check_dim(n);
    if (!(s0 > t0)) throw DomainError("slant cylinder needs s0 > t0");
    if (!(rho > 0.0)) throw DomainError("slant cylinder radius must be positive");
    return {n, x0, t0, y0, s0, rho};
}

Point SlantCylinder::drift() const {
    Point l{0.0, 0.0, 0.0};
    for (int d = 0; d < n; ++d) l[d] = (y0[d] - x0[d]) / (s0 - t0);
    return l;
}

Point SlantCylinder::axis(double t) const { return axpy(x0, t - t0, drift()); }

bool SlantCylinder::contains(const Point& x, double t) const {
    return t > t0 && t < s0 && distance(x, axis(t), n) < rho;
}

std::string SlantCylinder::describe() const {
    std::ostringstream os;
    os << "V(rho=" << format_double(rho) << ",X0=(" << format_point(x0, n) << "," << format_double(t0) << "),Y0=("
       << format_point(y0, n) << "," << format_double(s0) << "))";
    return os.str();
}

SlantCheck check_K_slant(const SlantCylinder& V, double K, const Ball& enclosing, const Weight& w,
                         const QuadratureSpec& spec) {
    if (!(K >= 1.0)) throw DomainError("K-slant condition needs K >= 1");
    if (w.dim() != V.n) throw DomainError("weight and slant cylinder dimensions differ");
    const int n = V.n;
    const double r = enclosing.radius;
    const double A = std::pow(ball_average(w, enclosing, -static_cast<double>(n), spec), 1.0 / n);
    SlantCheck c;
    c.inverse_scale = A;
    c.clause1_lower = V.rho - r / (2.0 * K);
    c.clause1_upper = r - V.rho;
    // The axis is a segment, so its farthest point from y is an endpoint.
    const double far = std::max(distance(V.x0, enclosing.center, n), distance(V.y0, enclosing.center, n));
    c.clause2 = r - V.rho - far;
    const double dt = V.s0 - V.t0;
    c.clause3_lower = dt - V.rho * A * distance(V.y0, V.x0, n) / K;
    c.clause3_upper = K * V.rho * V.rho * A - dt;
    const double tol_r = 1e-12 * r;
    const double tol_t = 1e-12 * dt;
    c.pass = c.clause1_lower >= -tol_r && c.clause1_upper >= -tol_r && c.clause2 >= -tol_r &&
             c.clause3_lower >= -tol_t && c.clause3_upper >= -tol_t;
    return c;
}

Stair build_stair(const Weight& w, const Point& y, double r, double rho, double h, const Point& dir, double reach,
                  const QuadratureSpec& spec) {
    const int n = w.dim();
    if (!(rho > 0.0) || !(rho < r)) throw DomainError("stair needs 0 < rho < r");
    if (!(h >= 1.0 && h <= 2.0)) throw DomainError("stair height factor must lie in [1, 2]");
    if (!(reach >= 0.0 && reach < 1.0)) throw DomainError("stair reach must lie in [0, 1)");
    if (norm(y, n) + rho > r * (1.0 + 1e-12)) throw DomainError("stair needs B_rho(0) inside B_r(y)");
    const double dn = norm(dir, n);
    if (reach > 0.0 && !(dn > 0.0)) throw DomainError("stair direction must be nonzero");

    Stair st;
    for (int d = 0; d < n; ++d) st.y_star[d] = rho / (rho - r) * y[d];
    // r_{m0+1} <= rho < r_{m0}
    int m0 = 0;
    while (r / std::ldexp(1.0, m0 + 1) > rho) ++m0;
    st.m0 = m0;
    for (int m = 0; m <= m0 + 2; ++m) {
        const double tau = std::ldexp(1.0, -m);
        st.r.push_back(r * tau);
        Point ym{0.0, 0.0, 0.0};
        for (int d = 0; d < n; ++d) ym[d] = (1.0 - tau) * st.y_star[d] + tau * y[d];
        st.y.push_back(ym);
        const double avg = ball_average(w, Ball{ym, st.r.back()}, -static_cast<double>(n), spec);
        st.s.push_back(h * st.r.back() * st.r.back() * std::pow(avg, 1.0 / n));
    }
    for (int m = m0; m >= 0; --m) {
        Point top = st.y[m];
        for (int d = 0; d < n; ++d) top[d] += reach * st.r[m + 1] * (dn > 0.0 ? dir[d] / dn : 0.0);
        const double bottom_t = m == m0 ? 0.0 : st.s[m + 1];
        StairStep step;
        step.m = m;
        step.V = SlantCylinder::make(n, st.y[m + 1], bottom_t, top, st.s[m], st.r[m + 2]);
        step.enclosing = Ball{st.y[m], st.r[m]};
        st.steps.push_back(step);
    }
    return st;
}

namespace {

Grid time_axis(Grid g, double t_begin, double duration, double tau) {
    if (!(tau > 0.0)) tau = g.h * g.h;
    const int steps = std::max(1, static_cast<int>(std::ceil(duration / tau - 1e-9)));
    g.tau = duration / steps;
    g.t0 = t_begin;
    g.nt = steps + 1;
    return g;
}

int level_of(const Grid& g, double t) {
    const double k = (t - g.t0) / g.tau;
    const long kr = std::lround(k);
    if (std::abs(k - kr) > 1e-6 || kr < 0 || kr >= g.nt) {
        throw DomainError("grid time levels do not cover the domain");
    }
    return static_cast<int>(kr);
}

std::vector<std::array<int, 3>> neighbour_offsets(int n) {
    std::vector<std::array<int, 3>> out;
    const int total = n == 1 ? 3 : (n == 2 ? 9 : 27);
    for (int c = 0; c < total; ++c) {
        std::array<int, 3> d{0, 0, 0};
        int v = c;
        bool zero = true;
        for (int k = 0; k < n; ++k) {
            d[k] = v % 3 - 1;
            v /= 3;
            zero = zero && d[k] == 0;
        }
        if (!zero) out.push_back(d);
    }
    return out;
}

/// Builds the classification from per-level interior predicates.
SpaceTimeDomain classify(const Grid& grid, int first, int last,
                         const std::function<bool(int, const Point&)>& inside,
                         const std::function<Point(int)>& centre_at) {
    grid.validate();
    SpaceTimeDomain dom;
    dom.grid = grid;
    dom.first_level = first;
    dom.last_level = last;
    const std::size_t S = grid.spatial();
    dom.kind.assign(grid.size(), NodeKind::outside);
    const auto offs = neighbour_offsets(grid.n);

    std::vector<std::vector<char>> in(static_cast<std::size_t>(last - first + 1), std::vector<char>(S, 0));
    for (int k = first; k <= last; ++k) {
        auto& lv = in[static_cast<std::size_t>(k - first)];
        for (std::size_t i = 0; i < S; ++i) lv[i] = inside(k, grid.node(i)) ? 1 : 0;
        // Diameter resolution through the node nearest the centre.
        const Point c = centre_at(k);
        std::array<int, 3> mc{0, 0, 0};
        for (int d = 0; d < grid.n; ++d) {
            mc[d] = std::clamp(static_cast<int>(std::lround((c[d] - grid.lower[d]) / grid.h)), 0, grid.nx - 1);
        }
        for (int d = 0; d < grid.n; ++d) {
            int count = 0;
            auto m = mc;
            for (int j = 0; j < grid.nx; ++j) {
                m[d] = j;
                count += lv[grid.flat(m)];
            }
            if (count < 3) throw DomainError("grid too coarse: fewer than 3 interior nodes across a diameter");
        }
    }
    for (int k = first; k <= last; ++k) {
        const auto& lv = in[static_cast<std::size_t>(k - first)];
        for (std::size_t i = 0; i < S; ++i) {
            if (!lv[i]) continue;
            dom.kind[grid.index(k, i)] = k == first ? NodeKind::boundary : NodeKind::interior;
            const auto m = grid.multi(i);
            for (const auto& d : offs) {
                std::array<int, 3> q = m;
                for (int a = 0; a < grid.n; ++a) {
                    q[a] += d[a];
                    if (q[a] < 0 || q[a] >= grid.nx) throw DomainError("grid box does not contain the boundary shell");
                }
                const std::size_t j = grid.flat(q);
                if (!lv[j]) dom.kind[grid.index(k, j)] = NodeKind::boundary;
            }
        }
    }
    // Nodes entering the domain between levels take their previous value from
    // the boundary (only happens for drifting tubes).
    for (int k = first + 1; k <= last; ++k) {
        for (std::size_t i = 0; i < S; ++i) {
            if (dom.kind[grid.index(k, i)] != NodeKind::interior) continue;
            auto& below = dom.kind[grid.index(k - 1, i)];
            if (below == NodeKind::outside) below = NodeKind::boundary;
        }
    }
    return dom;
}

}  // namespace

Grid cylinder_grid(const WeightedCylinder& cyl, double h, double tau) {
    if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
    const int n = cyl.dim();
    const int m = std::max(1, static_cast<int>(std::lround(cyl.radius() / h)));
    Grid g;
    g.n = n;
    g.h = cyl.radius() / m;
    g.nx = 2 * m + 1;
    for (int d = 0; d < n; ++d) g.lower[d] = cyl.center()[d] - cyl.radius();
    g = time_axis(g, cyl.t_begin(), cyl.height(), tau);
    if (cyl.kind() == CylinderKind::Q) g.nt = 2 * (g.nt - 1) + 1;
    g.validate();
    return g;
}

Grid slant_grid(const SlantCylinder& V, double h, double tau) {
    if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
    Grid g;
    g.n = V.n;
    g.h = h;
    double extent = 0.0;
    for (int d = 0; d < V.n; ++d) {
        const double lo = std::min(V.x0[d], V.y0[d]) - V.rho - 2.0 * h;
        const double hi = std::max(V.x0[d], V.y0[d]) + V.rho + 2.0 * h;
        g.lower[d] = lo;
        extent = std::max(extent, hi - lo);
    }
    g.nx = std::max(9, static_cast<int>(std::ceil(extent / h - 1e-9)) + 1);
    g = time_axis(g, V.t0, V.s0 - V.t0, tau);
    g.validate();
    return g;
}

SpaceTimeDomain cylinder_domain(const WeightedCylinder& cyl, const Grid& grid) {
    if (grid.n != cyl.dim()) throw DomainError("grid and cylinder dimensions differ");
    const int first = level_of(grid, cyl.t_begin());
    const int last = level_of(grid, cyl.t_end());
    const double r = cyl.radius() * (1.0 - 1e-12);
    const Point c = cyl.center();
    SpaceTimeDomain dom = classify(
        grid, first, last, [&](int, const Point& x) { return distance(x, c, grid.n) < r; },
        [&](int) { return c; });
    dom.centre = [c](int) { return c; };
    dom.radius = cyl.radius();
    return dom;
}

SpaceTimeDomain slant_domain(const SlantCylinder& V, const Grid& grid) {
    if (grid.n != V.n) throw DomainError("grid and slant cylinder dimensions differ");
    const int first = level_of(grid, V.t0);
    const int last = level_of(grid, V.s0);
    const double rho = V.rho * (1.0 - 1e-12);
    SpaceTimeDomain dom = classify(
        grid, first, last, [&](int k, const Point& x) { return distance(x, V.axis(grid.time(k)), V.n) < rho; },
        [&](int k) { return V.axis(grid.time(k)); });
    dom.centre = [V, grid](int k) { return V.axis(grid.time(k)); };
    dom.radius = V.rho;
    return dom;
}

namespace {
NodeMask mask_of(const SpaceTimeDomain& dom) {
    NodeMask mask(dom.grid);
    for (std::size_t i = 0; i < dom.kind.size(); ++i) mask.flags[i] = dom.kind[i] == NodeKind::boundary ? 1 : 0;
    return mask;
}
}  // namespace

NodeMask parabolic_boundary(const WeightedCylinder& cyl, const Grid& grid) { return mask_of(cylinder_domain(cyl, grid)); }

NodeMask parabolic_boundary(const SlantCylinder& V, const Grid& grid) { return mask_of(slant_domain(V, grid)); }

}  // namespace wrlab

#pragma once

#include <string>
#include <vector>

#include "wrlab/ball_calculus.hpp"
#include "wrlab/grid.hpp"
#include "wrlab/quadrature.hpp"
#include "wrlab/weights.hpp"

namespace wrlab {

enum class CylinderKind { C, Q };

/// B_r(y) x (s - h, s) for kind C, B_r(y) x (s - h, s + h) for kind Q, with
/// h = r^2 ((w^{-n})_{B_r(y)})^{1/n}. The height is fixed at construction.
class WeightedCylinder {
public:
    CylinderKind kind() const { return kind_; }
    const Point& center() const { return y_; }
    double time() const { return s_; }
    double radius() const { return r_; }
    double height() const { return h_; }
    int dim() const { return w_.dim(); }
    const Weight& weight() const { return w_; }
    Ball ball() const { return {y_, r_}; }
    double t_begin() const { return s_ - h_; }
    double t_end() const { return kind_ == CylinderKind::C ? s_ : s_ + h_; }
    double duration() const { return t_end() - t_begin(); }
    /// ((w^{-n})_{B_r(y)})^{1/n}.
    double inverse_scale() const { return h_ / (r_ * r_); }
    bool contains(const Point& x, double t) const;
    /// Same ball and stored height, other kind.
    WeightedCylinder with_kind(CylinderKind k) const;
    std::string describe() const;

private:
    friend WeightedCylinder make_cylinder(const Weight&, const Point&, double, double, CylinderKind,
                                          const QuadratureSpec&);
    friend WeightedCylinder make_cylinder_with_height(const Weight&, const Point&, double, double, double,
                                                      CylinderKind);
    WeightedCylinder(CylinderKind k, const Point& y, double s, double r, double h, Weight w)
        : kind_(k), y_(y), s_(s), r_(r), h_(h), w_(std::move(w)) {}
    CylinderKind kind_;
    Point y_;
    double s_;
    double r_;
    double h_;
    Weight w_;
};

WeightedCylinder make_cylinder(const Weight& w, const Point& y, double s, double r, CylinderKind kind,
                               const QuadratureSpec& spec = {});
/// For callers that already hold ((w^{-n})_B)^{1/n}; h must be positive.
WeightedCylinder make_cylinder_with_height(const Weight& w, const Point& y, double s, double r, double h,
                                           CylinderKind kind);

struct CylinderMeasure {
    double measure = 0.0;
    double lower = 0.0;     ///< sigma_n r^{n+2}
    double upper = 0.0;     ///< A sigma_n r^{n+2}
    double a_used = 1.0;    ///< claimed bound if present, else the per-ball A_{1+1/n} quantity
    double q_to_c = 2.0;    ///< w(Q) / w(C)
    bool bounds_ok = true;
};

CylinderMeasure cylinder_measure(const WeightedCylinder& cyl, const QuadratureSpec& spec = {});

/// {(x,t): |x - l (t - t0) - x0| < rho, t0 < t < s0} with l = (y0 - x0)/(s0 - t0).
struct SlantCylinder {
    int n = 2;
    Point x0{0.0, 0.0, 0.0};
    double t0 = 0.0;
    Point y0{0.0, 0.0, 0.0};
    double s0 = 1.0;
    double rho = 1.0;

    static SlantCylinder make(int n, const Point& x0, double t0, const Point& y0, double s0, double rho);
    Point drift() const;
    Point axis(double t) const;
    bool contains(const Point& x, double t) const;
    std::string describe() const;
};

struct SlantCheck {
    bool pass = false;
    double clause1_lower = 0.0;  ///< rho - r/(2K)
    double clause1_upper = 0.0;  ///< r - rho
    double clause2 = 0.0;        ///< r - rho - max distance of the axis from y
    double clause3_lower = 0.0;  ///< (s0 - t0) - K^{-1} rho A |y0 - x0|
    double clause3_upper = 0.0;  ///< K rho^2 A - (s0 - t0)
    double inverse_scale = 0.0;  ///< A = ((w^{-n})_{B_r(y)})^{1/n}
};

SlantCheck check_K_slant(const SlantCylinder& V, double K, const Ball& enclosing, const Weight& w,
                         const QuadratureSpec& spec = {});

/// One block of the prop-up stair: tube V with enclosing ball B_{r_m}(y_m).
struct StairStep {
    int m = 0;
    SlantCylinder V;
    Ball enclosing;
};

struct Stair {
    Point y_star{0.0, 0.0, 0.0};
    int m0 = 0;
    std::vector<double> r;  ///< r_m, m = 0..m0+2
    std::vector<Point> y;   ///< y_m
    std::vector<double> s;  ///< s_m = h r_m^2 ((w^{-n})_{B_{r_m}(y_m)})^{1/n}
    std::vector<StairStep> steps;  ///< m = m0 first, climbing to m = 0
};

/// Stair from B_rho(0) at t = 0 up through the balls B_{r 2^{-m}}(y(2^{-m}))
/// with y(tau) = (1 - tau) y* + tau y, y* = rho/(rho - r) y. Requires
/// B_rho(0) inside B_r(y), rho < r, h in [1, 2]. Each step's top point is
/// y_m + reach r_{m+1} dir with reach in [0, 1).
Stair build_stair(const Weight& w, const Point& y, double r, double rho, double h, const Point& dir, double reach,
                  const QuadratureSpec& spec = {});

/// Spatial box [y - r, y + r]^n with h' = r / round(r / h) and tau' = duration / ceil(duration / tau);
/// tau defaults to h'^2.
Grid cylinder_grid(const WeightedCylinder& cyl, double h, double tau = 0.0);
/// Box around the swept tube with a two-cell margin.
Grid slant_grid(const SlantCylinder& V, double h, double tau = 0.0);

/// Node classification. Interior nodes lie strictly inside the open set; the
/// boundary consists of the bottom slice (interior and shell) plus, at later
/// levels, the shell: every stencil neighbour of an interior node that is not
/// itself interior. The top slice is interior where the open ball is.
SpaceTimeDomain cylinder_domain(const WeightedCylinder& cyl, const Grid& grid);
SpaceTimeDomain slant_domain(const SlantCylinder& V, const Grid& grid);

NodeMask parabolic_boundary(const WeightedCylinder& cyl, const Grid& grid);
NodeMask parabolic_boundary(const SlantCylinder& V, const Grid& grid);

}  // namespace wrlab

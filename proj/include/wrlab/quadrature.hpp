#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wrlab/common.hpp"

namespace wrlab {

struct Ball {
    Point center{0.0, 0.0, 0.0};
    double radius = 1.0;
};

struct Sphere {
    Point center{0.0, 0.0, 0.0};
    double radius = 0.0;
};

struct QuadratureSpec {
    enum class Method { analyticRadial, adaptiveSubdivision, tensorGrid };
    enum class Singular { polarSplit, cellOffset };

    Method method = Method::adaptiveSubdivision;
    double rel_tol = 1e-6;
    int max_depth = 30;
    Singular singular = Singular::polarSplit;

    void validate() const;
};

/// Geometric facts about an integrand that the ball engine exploits.
struct IntegrandHints {
    /// Points where the integrand may blow up or vanish non-smoothly.
    std::vector<Point> singular_points;
    /// Surfaces across which the integrand may jump or kink.
    std::vector<Sphere> spheres;
    /// Set when the integrand depends on |x - centre| only.
    std::optional<Point> radial_center;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
};

struct Interval1D {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    double worst_a = 0.0;
    double worst_b = 0.0;
    std::size_t evaluations = 0;
};

/// Globally adaptive 15-point Gauss-Kronrod over [breaks.front(), breaks.back()],
/// split initially at every interior break.
Interval1D adaptive_gk15(const std::function<double(double)>& f, std::span<const double> breaks,
                         double rel_tol, double abs_tol, int max_depth);

using Integrand = std::function<double(const Point&)>;

/// Integral of f over a ball in R^n. Throws NumericalError on non-convergence,
/// naming the offending ball and the worst sub-cell.
QuadratureResult integrate_ball(const Integrand& f, const Ball& ball, int n, const IntegrandHints& hints,
                                const QuadratureSpec& spec, double abs_tol = 0.0);

/// Integral of f over an axis-aligned box; boxes touching a singular point are
/// refined dyadically toward it. Sample points never hit box corners.
double integrate_box(const Integrand& f, const Point& lower, const Point& upper, int n,
                     std::span<const Point> singular_points, int refine_depth = 10);

}  // namespace wrlab

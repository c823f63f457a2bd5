#pragma once

// Reference integrators written independently of the library engine: fixed
// composite Gauss-Legendre rules in polar coordinates, no adaptivity.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

struct Rule {
    std::vector<double> x, w;
};

/// n-point Gauss-Legendre on [-1,1] by Newton iteration on P_n.
inline Rule gauss_legendre(int n) {
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        const double dp = n * (z * p1 - p0) / (z * z - 1.0);
        r.x[i] = z;
        r.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

/// Composite rule on [a,b] with `pieces` equal panels.
inline double composite(const std::function<double(double)>& f, double a, double b, int pieces, const Rule& g) {
    double s = 0.0;
    const double h = (b - a) / pieces;
    for (int p = 0; p < pieces; ++p) {
        const double c = a + (p + 0.5) * h;
        for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * 0.5 * h * f(c + 0.5 * h * g.x[i]);
    }
    return s;
}

/// Integral over the disc B_r(c) in R^2 of f, in polar coordinates about p
/// (a point of the closed disc) with radial substitution s = R u^4.
inline double disc_polar(const std::function<double(double, double)>& f, double cx, double cy, double r, double px,
                         double py, int pieces = 16) {
    const Rule g = gauss_legendre(24);
    const double dx = px - cx, dy = py - cy;
    auto theta_integrand = [&](double th) {
        const double ux = std::cos(th), uy = std::sin(th);
        const double b = ux * dx + uy * dy;
        const double cc = dx * dx + dy * dy - r * r;
        const double disc = b * b - cc;
        if (disc <= 0.0) return 0.0;
        const double R = -b + std::sqrt(disc);
        if (R <= 0.0) return 0.0;
        auto radial = [&](double u) {
            const double s = R * u * u * u * u;
            return f(px + s * ux, py + s * uy) * s * 4.0 * R * u * u * u;
        };
        return composite(radial, 0.0, 1.0, pieces, g);
    };
    return composite(theta_integrand, 0.0, 2.0 * std::numbers::pi, 4 * pieces, g);
}

}  // namespace oracle

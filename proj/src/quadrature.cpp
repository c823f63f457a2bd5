#include "wrlab/quadrature.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <sstream>

namespace wrlab {

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

constexpr double kGl4x[4] = {-0.861136311594052575223946488892809, -0.339981043584856264802665759103245,
                             0.339981043584856264802665759103245, 0.861136311594052575223946488892809};
constexpr double kGl4w[4] = {0.347854845137453857373063949221999, 0.652145154862546142626936050778001,
                             0.652145154862546142626936050778001, 0.347854845137453857373063949221999};

struct Piece {
    double a, b, value, error;
    int depth;
    bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk15(const std::function<double(double)>& f, double a, double b, int depth, std::size_t& evals) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resk = fc * kWgk[7];
    double resg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double x = h * kXgk[j];
        const double s = f(c - x) + f(c + x);
        resk += kWgk[j] * s;
        if (j % 2 == 1) resg += kWg[j / 2] * s;
    }
    evals += 15;
    double err = std::abs(resk - resg) * std::abs(h);
    if (!std::isfinite(resk)) err = std::numeric_limits<double>::infinity();
    return {a, b, resk * h, err, depth};
}

std::string describe_ball(const Ball& b, int n) {
    return "ball(center=" + format_point(b.center, n) + ", r=" + format_double(b.radius) + ")";
}

}  // namespace

void QuadratureSpec::validate() const {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw DomainError("quadrature relTol must lie in (0,1)");
    if (max_depth < 1 || max_depth > 40) throw DomainError("quadrature maxDepth must lie in [1,40]");
}

Interval1D adaptive_gk15(const std::function<double(double)>& f, std::span<const double> breaks, double rel_tol,
                         double abs_tol, int max_depth) {
    Interval1D out;
    if (breaks.size() < 2) return out;
    std::priority_queue<Piece> heap;
    std::vector<Piece> frozen;
    double total = 0.0;
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        Piece p = gk15(f, breaks[i], breaks[i + 1], 0, out.evaluations);
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }
    constexpr std::size_t kMaxPieces = 4000;
    std::size_t pieces = heap.size();
    while (true) {
        if (!std::isfinite(total) || !std::isfinite(total_err)) {
            out.converged = false;
            break;
        }
        const double tol = std::max(abs_tol, rel_tol * std::abs(total));
        if (total_err <= tol) break;
        if (heap.empty() || pieces > kMaxPieces) {
            out.converged = false;
            break;
        }
        Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (worst.depth >= max_depth || !(mid > worst.a && mid < worst.b)) {
            frozen.push_back(worst);
            continue;
        }
        Piece left = gk15(f, worst.a, mid, worst.depth + 1, out.evaluations);
        Piece right = gk15(f, mid, worst.b, worst.depth + 1, out.evaluations);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++pieces;
    }
    // Re-sum from the pieces for a result independent of accumulation drift.
    double sum = 0.0;
    double err = 0.0;
    double worst_err = -1.0;
    auto visit = [&](const Piece& p) {
        sum += p.value;
        err += p.error;
        if (p.error > worst_err) {
            worst_err = p.error;
            out.worst_a = p.a;
            out.worst_b = p.b;
        }
    };
    for (const auto& p : frozen) visit(p);
    while (!heap.empty()) {
        visit(heap.top());
        heap.pop();
    }
    out.value = sum;
    out.error = err;
    if (!std::isfinite(sum)) out.converged = false;
    return out;
}

namespace {

class BallEngine {
public:
    BallEngine(const Integrand& f, const Ball& ball, int n, const IntegrandHints& hints, const QuadratureSpec& spec,
               double abs_tol)
        : f_(f), ball_(ball), n_(n), hints_(hints), spec_(spec), abs_tol_(abs_tol) {}

    QuadratureResult run() {
        if (spec_.method == QuadratureSpec::Method::tensorGrid) return tensor();
        const double r = ball_.radius;
        if (hints_.radial_center && distance(*hints_.radial_center, ball_.center, n_) <= 1e-12 * r) {
            return radial();
        }
        return polar();
    }

private:
    [[noreturn]] void fail(const std::string& where) const {
        std::ostringstream os;
        os << "quadrature did not converge on " << describe_ball(ball_, n_) << "; worst cell " << where;
        throw NumericalError(os.str());
    }

    bool is_singular_at(const Point& p) const {
        if (spec_.singular != QuadratureSpec::Singular::polarSplit) return false;
        for (const auto& s : hints_.singular_points) {
            if (distance(s, p, n_) <= 1e-12 * ball_.radius) return true;
        }
        return false;
    }

    /// Integral over s in [0, R] of f(p + s dir) s^{n-1}, with the substitution
    /// s = R u^4 when p is singular.
    Interval1D ray(const Point& p, const Point& dir, double R, bool singular_origin, double rel, double abs) {
        if (!(R > 0.0)) return {};
        std::vector<double> sb;
        for (const auto& sp : hints_.spheres) {
            // |p + s dir - q| = rho
            Point d{p[0] - sp.center[0], p[1] - sp.center[1], p[2] - sp.center[2]};
            const double b = dot(dir, d, n_);
            const double cc = dot(d, d, n_) - sp.radius * sp.radius;
            const double disc = b * b - cc;
            if (disc <= 0.0) continue;
            const double sq = std::sqrt(disc);
            for (double s : {-b - sq, -b + sq}) {
                if (s > 1e-12 * R && s < R * (1.0 - 1e-12)) sb.push_back(s);
            }
        }
        std::sort(sb.begin(), sb.end());
        const int nm1 = n_ - 1;
        std::vector<double> breaks;
        breaks.push_back(0.0);
        if (singular_origin) {
            for (double s : sb) breaks.push_back(std::pow(s / R, 0.25));
            breaks.push_back(1.0);
            auto g = [&](double u) {
                const double u2 = u * u;
                const double s = R * u2 * u2;
                const double jac = 4.0 * R * u2 * u;
                double v = f_(axpy(p, s, dir)) * jac;
                if (nm1 >= 1) v *= s;
                if (nm1 == 2) v *= s;
                return v;
            };
            return adaptive_gk15(g, breaks, rel, abs, spec_.max_depth);
        }
        for (double s : sb) breaks.push_back(s);
        breaks.push_back(R);
        auto g = [&](double s) {
            double v = f_(axpy(p, s, dir));
            if (nm1 >= 1) v *= s;
            if (nm1 == 2) v *= s;
            return v;
        };
        return adaptive_gk15(g, breaks, rel, abs, spec_.max_depth);
    }

    QuadratureResult radial() {
        const double r = ball_.radius;
        const bool sing = is_singular_at(ball_.center);
        Point dir{1.0, 0.0, 0.0};
        const double surface = n_ * unit_ball_volume(n_);
        Interval1D res = ray(ball_.center, dir, r, sing, spec_.rel_tol, abs_tol_ / surface);
        evals_ += res.evaluations;
        if (!res.converged) {
            fail("radial s in [" + format_double(res.worst_a) + "," + format_double(res.worst_b) + "]");
        }
        return {surface * res.value, surface * res.error, evals_};
    }

    double boundary_distance(const Point& p, const Point& dir) const {
        Point d{p[0] - ball_.center[0], p[1] - ball_.center[1], p[2] - ball_.center[2]};
        const double b = dot(dir, d, n_);
        const double cc = dot(d, d, n_) - ball_.radius * ball_.radius;
        const double disc = b * b - cc;
        if (disc <= 0.0) return 0.0;
        return std::max(0.0, -b + std::sqrt(disc));
    }

    QuadratureResult polar() {
        const double r = ball_.radius;
        const Point& c = ball_.center;
        Point p = c;
        bool singular_origin = false;
        if (spec_.singular == QuadratureSpec::Singular::polarSplit) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& s : hints_.singular_points) {
                const double d = distance(s, c, n_);
                if (d <= r * (1.0 + 1e-12) && d < best) {
                    best = d;
                    p = s;
                    singular_origin = true;
                }
            }
        }
        const double off = distance(p, c, n_);
        const bool on_boundary = off >= r * (1.0 - 1e-12);
        Point e0{1.0, 0.0, 0.0};
        if (off > 1e-14 * r) {
            for (int i = 0; i < n_; ++i) e0[i] = (c[i] - p[i]) / off;
        }
        const double inner_rel = 0.1 * spec_.rel_tol;

        if (n_ == 1) {
            double total = 0.0;
            double err = 0.0;
            for (double sgn : {1.0, -1.0}) {
                Point dir{sgn, 0.0, 0.0};
                const double R = boundary_distance(p, dir);
                Interval1D res = ray(p, dir, R, singular_origin, spec_.rel_tol, 0.5 * abs_tol_);
                evals_ += res.evaluations;
                if (!res.converged) {
                    fail("ray dir=" + format_double(sgn) + " s in [" + format_double(res.worst_a) + "," +
                         format_double(res.worst_b) + "]");
                }
                total += res.value;
                err += res.error;
            }
            return {total, err, evals_};
        }

        if (n_ == 2) {
            const Point e1{-e0[1], e0[0], 0.0};
            const double pi = std::numbers::pi;
            std::vector<double> breaks = on_boundary ? std::vector<double>{-0.5 * pi, 0.0, 0.5 * pi}
                                                     : std::vector<double>{-pi, -0.5 * pi, 0.0, 0.5 * pi, pi};
            const double measure = breaks.back() - breaks.front();
            const double inner_abs = 0.1 * abs_tol_ / measure;
            auto g = [&](double th) {
                const Point dir{std::cos(th) * e0[0] + std::sin(th) * e1[0],
                                std::cos(th) * e0[1] + std::sin(th) * e1[1], 0.0};
                const double R = boundary_distance(p, dir);
                Interval1D res = ray(p, dir, R, singular_origin, inner_rel, inner_abs);
                evals_ += res.evaluations;
                if (!res.converged) {
                    fail("theta=" + format_double(th) + " s in [" + format_double(res.worst_a) + "," +
                         format_double(res.worst_b) + "]");
                }
                return res.value;
            };
            Interval1D outer = adaptive_gk15(g, breaks, spec_.rel_tol, abs_tol_, spec_.max_depth);
            if (!outer.converged) {
                fail("theta in [" + format_double(outer.worst_a) + "," + format_double(outer.worst_b) + "]");
            }
            return {outer.value, outer.error, evals_};
        }

        // n == 3: pole along e0, mu = cos(polar angle).
        Point a{1.0, 0.0, 0.0};
        if (std::abs(e0[0]) > 0.9) a = {0.0, 1.0, 0.0};
        Point e1{e0[1] * a[2] - e0[2] * a[1], e0[2] * a[0] - e0[0] * a[2], e0[0] * a[1] - e0[1] * a[0]};
        const double l1 = norm(e1, 3);
        for (double& v : e1) v /= l1;
        const Point e2{e0[1] * e1[2] - e0[2] * e1[1], e0[2] * e1[0] - e0[0] * e1[2], e0[0] * e1[1] - e0[1] * e1[0]};
        const double pi = std::numbers::pi;
        std::vector<double> mu_breaks = on_boundary ? std::vector<double>{0.0, 1.0} : std::vector<double>{-1.0, 0.0, 1.0};
        const std::vector<double> phi_breaks{0.0, 0.5 * pi, pi, 1.5 * pi, 2.0 * pi};
        const double measure = (mu_breaks.back() - mu_breaks.front()) * 2.0 * pi;
        auto g_mu = [&](double mu) {
            const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
            auto g_phi = [&](double ph) {
                const double cp = std::cos(ph);
                const double sp = std::sin(ph);
                Point dir{};
                for (int i = 0; i < 3; ++i) dir[i] = mu * e0[i] + st * (cp * e1[i] + sp * e2[i]);
                const double R = boundary_distance(p, dir);
                Interval1D res = ray(p, dir, R, singular_origin, 0.1 * inner_rel, 0.01 * abs_tol_ / measure);
                evals_ += res.evaluations;
                if (!res.converged) {
                    fail("mu=" + format_double(mu) + " phi=" + format_double(ph) + " s in [" +
                         format_double(res.worst_a) + "," + format_double(res.worst_b) + "]");
                }
                return res.value;
            };
            Interval1D mid = adaptive_gk15(g_phi, phi_breaks, inner_rel, 0.1 * abs_tol_ / 2.0, spec_.max_depth);
            if (!mid.converged) {
                fail("mu=" + format_double(mu) + " phi in [" + format_double(mid.worst_a) + "," +
                     format_double(mid.worst_b) + "]");
            }
            return mid.value;
        };
        Interval1D outer = adaptive_gk15(g_mu, mu_breaks, spec_.rel_tol, abs_tol_, spec_.max_depth);
        if (!outer.converged) {
            fail("mu in [" + format_double(outer.worst_a) + "," + format_double(outer.worst_b) + "]");
        }
        return {outer.value, outer.error, evals_};
    }

    /// Tensor Gauss rule on the bounding cube with an indicator; first-order
    /// accurate at the sphere, used as a crude cross-check.
    QuadratureResult tensor() {
        const double r = ball_.radius;
        const int cap = n_ == 3 ? 64 : (n_ == 2 ? 512 : 4096);
        double prev = std::numeric_limits<double>::quiet_NaN();
        for (int m = 8; m <= cap; m *= 2) {
            const double hcell = 2.0 * r / m;
            double sum = 0.0;
            std::array<int, 3> idx{0, 0, 0};
            const int cells = n_ == 1 ? m : (n_ == 2 ? m * m : m * m * m);
            for (int cidx = 0; cidx < cells; ++cidx) {
                int rem = cidx;
                for (int d = 0; d < n_; ++d) {
                    idx[d] = rem % m;
                    rem /= m;
                }
                const int pts = n_ == 1 ? 4 : (n_ == 2 ? 16 : 64);
                for (int q = 0; q < pts; ++q) {
                    int qr = q;
                    Point x{0.0, 0.0, 0.0};
                    double w = 1.0;
                    for (int d = 0; d < n_; ++d) {
                        const int k = qr % 4;
                        qr /= 4;
                        x[d] = ball_.center[d] - r + hcell * (idx[d] + 0.5 + 0.5 * kGl4x[k]);
                        w *= 0.5 * hcell * kGl4w[k];
                    }
                    if (distance(x, ball_.center, n_) < r) sum += w * f_(x);
                }
                evals_ += pts;
            }
            if (std::isfinite(prev) && std::abs(sum - prev) <= std::max(abs_tol_, spec_.rel_tol * std::abs(sum))) {
                return {sum, std::abs(sum - prev), evals_};
            }
            prev = sum;
        }
        fail("tensor grid refinement exhausted");
    }

    const Integrand& f_;
    Ball ball_;
    int n_;
    const IntegrandHints& hints_;
    const QuadratureSpec& spec_;
    double abs_tol_;
    std::size_t evals_ = 0;
};

}  // namespace

QuadratureResult integrate_ball(const Integrand& f, const Ball& ball, int n, const IntegrandHints& hints,
                                const QuadratureSpec& spec, double abs_tol) {
    check_dim(n);
    spec.validate();
    if (!(ball.radius > 0.0)) throw DomainError("ball radius must be positive");
    BallEngine engine(f, ball, n, hints, spec, abs_tol);
    return engine.run();
}

namespace {

double box_rec(const Integrand& f, const Point& lo, const Point& hi, int n, std::span<const Point> sing, int depth) {
    bool touches = false;
    if (depth > 0) {
        for (const auto& s : sing) {
            bool inside = true;
            for (int d = 0; d < n; ++d) inside = inside && s[d] >= lo[d] && s[d] <= hi[d];
            if (inside) {
                touches = true;
                break;
            }
        }
    }
    if (touches) {
        double sum = 0.0;
        const int children = 1 << n;
        for (int c = 0; c < children; ++c) {
            Point a = lo;
            Point b = hi;
            for (int d = 0; d < n; ++d) {
                const double mid = 0.5 * (lo[d] + hi[d]);
                if (c & (1 << d)) a[d] = mid;
                else b[d] = mid;
            }
            sum += box_rec(f, a, b, n, sing, depth - 1);
        }
        return sum;
    }
    const int pts = n == 1 ? 4 : (n == 2 ? 16 : 64);
    double sum = 0.0;
    for (int q = 0; q < pts; ++q) {
        int qr = q;
        Point x{0.0, 0.0, 0.0};
        double w = 1.0;
        for (int d = 0; d < n; ++d) {
            const int k = qr % 4;
            qr /= 4;
            const double half = 0.5 * (hi[d] - lo[d]);
            x[d] = 0.5 * (lo[d] + hi[d]) + half * kGl4x[k];
            w *= half * kGl4w[k];
        }
        sum += w * f(x);
    }
    return sum;
}

}  // namespace

double integrate_box(const Integrand& f, const Point& lower, const Point& upper, int n,
                     std::span<const Point> singular_points, int refine_depth) {
    check_dim(n);
    return box_rec(f, lower, upper, n, singular_points, refine_depth);
}

}  // namespace wrlab

#include "wrlab/ball_calculus.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace wrlab {

bool ball_contains(const Ball& outer, const Ball& inner, int n) {
    return distance(outer.center, inner.center, n) + inner.radius <= outer.radius * (1.0 + 1e-12);
}

namespace {

void append_lattice(BallFamily& fam, double spacing, const std::vector<double>& radii) {
    const int n = fam.n;
    const double R = fam.domain.radius;
    for (double r : radii) {
        const long K = static_cast<long>(std::floor((R - r) / spacing + 1e-9));
        std::array<long, 3> k{-K, n >= 2 ? -K : 0, n >= 3 ? -K : 0};
        while (true) {
            Ball b{fam.domain.center, r};
            for (int d = 0; d < n; ++d) b.center[d] += spacing * static_cast<double>(k[d]);
            if (ball_contains(fam.domain, b, n)) fam.balls.push_back(b);
            int d = 0;
            for (; d < n; ++d) {
                if (++k[d] <= K) break;
                k[d] = -K;
            }
            if (d == n) break;
        }
    }
}

std::vector<double> radius_ladder(double r_min, double ratio, double R) {
    std::vector<double> out;
    for (int j = 0;; ++j) {
        const double r = r_min * std::pow(ratio, j);
        if (r > R * (1.0 + 1e-12)) break;
        out.push_back(std::min(r, R));
    }
    return out;
}

}  // namespace

BallFamily BallFamily::lattice(int n, const Ball& domain, double spacing, double r_min, double ratio) {
    check_dim(n);
    if (!(domain.radius > 0.0) || !(spacing > 0.0) || !(r_min > 0.0) || !(ratio > 1.0)) {
        throw DomainError("invalid ball family generator");
    }
    BallFamily fam;
    fam.n = n;
    fam.domain = domain;
    fam.spacing = spacing;
    fam.r_min = r_min;
    fam.ratio = ratio;
    append_lattice(fam, spacing, radius_ladder(r_min, ratio, domain.radius));
    if (fam.balls.empty()) throw DomainError("ball family generator produced no balls");
    return fam;
}

BallFamily BallFamily::random(int n, const Ball& domain, std::size_t count, std::uint64_t seed, double r_min) {
    check_dim(n);
    if (count == 0 || !(r_min > 0.0) || !(r_min < 0.5 * domain.radius)) throw DomainError("invalid random ball family");
    BallFamily fam;
    fam.n = n;
    fam.domain = domain;
    fam.r_min = r_min;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double lmin = std::log(r_min);
    const double lmax = std::log(0.5 * domain.radius);
    while (fam.balls.size() < count) {
        const double r = std::exp(lmin + (lmax - lmin) * u(rng));
        Ball b{domain.center, r};
        for (int d = 0; d < n; ++d) b.center[d] += (2.0 * u(rng) - 1.0) * (domain.radius - r);
        if (ball_contains(domain, b, n)) fam.balls.push_back(b);
    }
    return fam;
}

BallFamily BallFamily::refined(int level) const {
    if (level <= 0 || spacing <= 0.0) return *this;
    // Level 1 halves the radius ratio in log scale; level 2 also halves the
    // centre spacing. Each level contains the previous one.
    BallFamily fam;
    fam.n = n;
    fam.domain = domain;
    fam.r_min = r_min;
    fam.ratio = std::sqrt(ratio);
    fam.spacing = level >= 2 ? 0.5 * spacing : spacing;
    append_lattice(fam, fam.spacing, radius_ladder(r_min, fam.ratio, domain.radius));
    return fam;
}

BallFamily BallFamily::restricted_to(const Ball& omega) const {
    BallFamily fam = *this;
    fam.balls.clear();
    for (const auto& b : balls) {
        if (ball_contains(omega, b, n)) fam.balls.push_back(b);
    }
    return fam;
}

Json BallFamily::describe() const {
    Json j;
    j["n"] = n;
    j["balls"] = balls.size();
    j["domain_center"] = format_point(domain.center, n);
    j["domain_radius"] = domain.radius;
    j["spacing"] = spacing;
    j["r_min"] = r_min;
    j["ratio"] = ratio;
    return j;
}

double ball_integral(const Weight& w, const Ball& B, double power, const QuadratureSpec& spec) {
    IntegrandHints h = w.hints();
    if (w.radial_any()) h.radial_center = B.center;
    Integrand f;
    if (power == 1.0) f = [&w](const Point& x) { return w(x); };
    else f = [&w, power](const Point& x) { return std::pow(w(x), power); };
    const double v = integrate_ball(f, B, w.dim(), h, spec).value;
    if (!std::isfinite(v)) throw NumericalError("quadrature diverged on ball(center=" + format_point(B.center, w.dim()) + ", r=" + format_double(B.radius) + ")");
    return v;
}

double ball_average(const Weight& w, const Ball& B, double power, const QuadratureSpec& spec) {
    return ball_integral(w, B, power, spec) / (unit_ball_volume(w.dim()) * std::pow(B.radius, w.dim()));
}

double weight_measure(const Weight& w, const Ball& B, const QuadratureSpec& spec) {
    return ball_integral(w, B, 1.0, spec);
}

double ap_ball_quantity(const Weight& w, const Ball& B, double p, const QuadratureSpec& spec) {
    if (!(p > 1.0)) throw DomainError("A_p needs p > 1");
    const double a = ball_average(w, B, 1.0, spec);
    const double b = ball_average(w, B, -1.0 / (p - 1.0), spec);
    return a * std::pow(b, p - 1.0);
}

double bmo_ball_quantity(const Weight& w, const Ball& B, double q, const QuadratureSpec& spec) {
    if (!(q >= 1.0)) throw DomainError("BMO_q needs q >= 1");
    const int n = w.dim();
    const double vol = unit_ball_volume(n) * std::pow(B.radius, n);
    const double m = ball_average(w, B, 1.0, spec);
    const double wB = m * vol;
    IntegrandHints h = w.hints();
    if (w.radial_any()) h.radial_center = B.center;
    if (auto rc = w.radial_center()) {
        if (auto lr = w.node().level_radius(m); lr && std::isfinite(*lr) && *lr > 0.0) h.spheres.push_back({*rc, *lr});
    }
    Integrand f;
    if (q == 1.0) f = [&w, m](const Point& x) { return std::abs(w(x) - m); };
    else f = [&w, m, q](const Point& x) {
        const double v = w(x);
        return std::pow(std::abs(v - m), q) * std::pow(v, 1.0 - q);
    };
    const double osc = integrate_ball(f, B, n, h, spec, 1e-4 * spec.rel_tol * wB).value;
    if (!std::isfinite(osc)) throw NumericalError("oscillation integral diverged");
    return std::pow(std::max(0.0, osc) / wB, 1.0 / q);
}

namespace {

SeminormEstimate sup_over(const BallFamily& F, const QuadratureSpec& spec,
                          const std::function<double(const Ball&)>& per_ball) {
    if (F.balls.empty()) throw DomainError("empty ball family");
    SeminormEstimate est;
    est.family = F;
    est.rel_tol = spec.rel_tol;
    est.per_ball.assign(F.balls.size(), 0.0);
    parallel_for(F.balls.size(), [&](std::size_t i) { est.per_ball[i] = per_ball(F.balls[i]); });
    for (std::size_t i = 0; i < est.per_ball.size(); ++i) {
        if (est.per_ball[i] > est.per_ball[est.argmax]) est.argmax = i;
    }
    est.value = est.per_ball[est.argmax];
    return est;
}

}  // namespace

SeminormEstimate ap_characteristic(const Weight& w, double p, const BallFamily& F, const QuadratureSpec& spec) {
    if (!(p > 1.0)) throw DomainError("A_p needs p > 1");
    if (F.n != w.dim()) throw DomainError("ball family and weight differ in dimension");
    return sup_over(F, spec, [&](const Ball& B) { return ap_ball_quantity(w, B, p, spec); });
}

SeminormEstimate bmo_q(const Weight& w, double q, const Ball& omega, const BallFamily& F, const QuadratureSpec& spec) {
    if (!(q >= 1.0)) throw DomainError("BMO_q needs q >= 1");
    if (F.n != w.dim()) throw DomainError("ball family and weight differ in dimension");
    const BallFamily inside = F.restricted_to(omega);
    if (inside.balls.empty()) throw DomainError("no ball of the family lies in the domain");
    return sup_over(inside, spec, [&](const Ball& B) { return bmo_ball_quantity(w, B, q, spec); });
}

SeminormEstimate bmo_weighted(const Weight& w, const Ball& omega, const BallFamily& F, const QuadratureSpec& spec) {
    return bmo_q(w, 1.0, omega, F, spec);
}

Report verify_truncation_bounds(const Weight& w, double p, const std::vector<TruncationMode>& levels,
                                const BallFamily& F, const QuadratureSpec& spec, double tol) {
    Report rep("truncation_bounds");
    rep.config["weight"] = w.spec_string();
    rep.config["p"] = p;
    rep.config["tol"] = tol;
    rep.config["family"] = F.describe();
    const double A = ap_characteristic(w, p, F, spec).value;
    rep.summary["A"] = A;
    const int n = w.dim();
    const double f = 1.0 + tol;
    for (const auto& mode : levels) {
        const Weight t = truncate(w, mode);
        const double est = ap_characteristic(t, p, F, spec).value;
        Json row;
        row["level"] = mode.describe();
        row["estimate"] = est;
        switch (mode.kind) {
            case TruncationMode::Kind::upper: {
                const double bound = std::pow(std::pow(A, 1.0 / (p - 1.0)) + 1.0, p - 1.0);
                rep.check_le("upper " + mode.describe(), est, bound * f);
                row["bound"] = bound;
                break;
            }
            case TruncationMode::Kind::lower: {
                const double bound = A + 1.0;
                rep.check_le("lower " + mode.describe(), est, bound * f);
                row["bound"] = bound;
                break;
            }
            case TruncationMode::Kind::band: {
                const double bound = std::pow(2.0, std::max(p - 2.0, 0.0)) * (A + 1.0) + 1.0;
                rep.check_le("band " + mode.describe(), est, bound * f);
                row["bound"] = bound;
                if (std::abs(p - (1.0 + 1.0 / n)) < 1e-12) {
                    rep.check_le("band A+2 " + mode.describe(), est, (A + 2.0) * f);
                    row["bound_a_plus_2"] = A + 2.0;
                }
                break;
            }
        }
        rep.rows.push_back(row);
    }
    return rep;
}

Report verify_mollification_bounds(const Weight& w, double p, const std::vector<double>& eps_list, double R0,
                                   const BallFamily& F, const QuadratureSpec& spec, double tol,
                                   std::optional<double> a_ref) {
    if (!(R0 > 0.0)) throw DomainError("R0 must be positive");
    const int n = w.dim();
    Report rep("mollification_bounds");
    rep.config["weight"] = w.spec_string();
    rep.config["p"] = p;
    rep.config["R0"] = R0;
    rep.config["tol"] = tol;
    rep.config["family"] = F.describe();
    double A = 0.0;
    if (a_ref) {
        A = *a_ref;
    } else {
        A = ap_characteristic(w, p, F, spec).value;
        if (const auto& c = w.claimed_ap_class(); c && std::abs(c->p - p) < 1e-12) A = std::max(A, c->bound);
    }
    rep.summary["A_ref"] = A;
    const double factor = std::pow(2.0, n * p);
    const Point origin = F.domain.center;
    const Ball small{origin, R0};
    const Ball big{origin, R0 + 1.0};
    const BallFamily f_small = BallFamily::lattice(n, small, 0.25 * R0, 0.125 * R0, 2.0);
    for (double eps : eps_list) {
        if (!(eps > 0.0 && eps < 1.0)) throw DomainError("mollification radius must lie in (0,1)");
        const Weight we = mollify(w, eps);
        const double est = ap_characteristic(we, p, F, spec).value;
        rep.check_le("A_p of mollified eps=" + format_double(eps), est, factor * A * (1.0 + tol));
        // Translates of the small family by |y| <= eps, which the per-ball
        // bound compares against.
        BallFamily f_big = f_small;
        f_big.domain = big;
        for (const auto& b : f_small.balls) {
            for (int a = -2; a <= 2; ++a) {
                for (int c = (n >= 2 ? -2 : 0); c <= (n >= 2 ? 2 : 0); ++c) {
                    if (a == 0 && c == 0) continue;
                    if (a * a + c * c > 4) continue;
                    Ball t = b;
                    t.center[0] += 0.5 * eps * a;
                    if (n >= 2) t.center[1] += 0.5 * eps * c;
                    if (ball_contains(big, t, n)) f_big.balls.push_back(t);
                }
            }
        }
        const double lhs = bmo_weighted(we, small, f_small, spec).value;
        const double rhs = bmo_weighted(w, big, f_big, spec).value;
        rep.check_le("BMO domination eps=" + format_double(eps), lhs, rhs * (1.0 + tol) + 1e-12);
        Json row;
        row["eps"] = eps;
        row["ap_mollified"] = est;
        row["ap_bound"] = factor * A;
        row["bmo_mollified"] = lhs;
        row["bmo_base_enlarged"] = rhs;
        rep.rows.push_back(row);
    }
    return rep;
}

Report verify_bmo_truncation_stability(const Weight& w, double R0, const BmoStabilityLevels& levels,
                                       const BallFamily& F, const QuadratureSpec& spec, double tol,
                                       double band_tol) {
    const Ball omega{F.domain.center, R0};
    Report rep("bmo_truncation_stability");
    rep.config["weight"] = w.spec_string();
    rep.config["R0"] = R0;
    rep.config["tol"] = tol;
    rep.config["stability_band"] = band_tol;
    rep.config["family"] = F.describe();
    const double base = bmo_weighted(w, omega, F, spec).value;
    rep.summary["bmo"] = base;
    for (double k : levels.lower) {
        const double est = bmo_weighted(truncate(w, TruncationMode::lower_at(k)), omega, F, spec).value;
        rep.check_le("lower truncation factor 2, k=" + format_double(k), est, 2.0 * base * (1.0 + tol) + 1e-14);
        Json row;
        row["kind"] = "lower";
        row["k"] = k;
        row["bmo"] = est;
        row["bound"] = 2.0 * base;
        rep.rows.push_back(row);
    }
    struct Variant {
        std::string name;
        Weight weight;
    };
    std::vector<Variant> variants{{"inverse", Weight::power_of(w, -1.0)}};
    for (double k : levels.upper) variants.push_back({"upper k=" + format_double(k), truncate(w, TruncationMode::upper_at(k))});
    for (auto [s, t] : levels.band) {
        variants.push_back({"band s=" + format_double(s) + " tau=" + format_double(t), truncate(w, TruncationMode::band(s, t))});
    }
    std::vector<std::vector<double>> ratios(variants.size());
    std::vector<double> bases;
    for (int level = 0; level < 3; ++level) {
        const BallFamily FL = F.refined(level);
        const double b = bmo_weighted(w, omega, FL, spec).value;
        bases.push_back(b);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            const double e = bmo_weighted(variants[v].weight, omega, FL, spec).value;
            ratios[v].push_back(b > 0.0 ? e / b : std::nan(""));
            Json row;
            row["kind"] = variants[v].name;
            row["refinement"] = level;
            row["balls"] = FL.balls.size();
            row["bmo_base"] = b;
            row["bmo_variant"] = e;
            row["ratio"] = ratios[v].back();
            rep.rows.push_back(row);
        }
    }
    for (std::size_t v = 0; v < variants.size(); ++v) {
        const auto& r = ratios[v];
        if (bases.front() == 0.0) {
            rep.check("ratio " + variants[v].name + " (zero base seminorm)", true);
            continue;
        }
        bool finite = true;
        double worst = 0.0;
        for (double x : r) {
            finite = finite && std::isfinite(x);
            if (r.front() > 0.0) worst = std::max(worst, std::abs(x / r.front() - 1.0));
        }
        rep.check("ratio " + variants[v].name + " finite", finite);
        if (r.front() > 0.0) {
            rep.check_le("ratio " + variants[v].name + " refinement drift", worst, band_tol);
        }
        rep.fit("ratio " + variants[v].name, r);
    }
    return rep;
}

void write_ball_csv(const std::string& path, const SeminormEstimate& est) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write " + path);
    out << "ball_center,radius,value\n";
    for (std::size_t i = 0; i < est.family.balls.size(); ++i) {
        const auto& b = est.family.balls[i];
        std::string c;
        for (int d = 0; d < est.family.n; ++d) c += (d ? " " : "") + format_double(b.center[d]);
        out << c << "," << format_double(b.radius) << "," << format_double(est.per_ball[i]) << "\n";
    }
}

}  // namespace wrlab

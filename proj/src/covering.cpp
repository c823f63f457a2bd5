#include "wrlab/covering.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_map>

namespace wrlab {

std::shared_ptr<const CellLattice> CellLattice::build(const WeightedCylinder& reference, int cells_space,
                                                      int cells_time, int extension) {
    const int n = reference.dim();
    if (n > 2) throw DomainError("the covering lattice supports n <= 2");
    if (reference.kind() != CylinderKind::C) throw DomainError("covering reference must be a C-cylinder");
    if (cells_space < 8 || cells_space % 2 != 0) throw DomainError("cells_space must be even and at least 8");
    if (cells_time < 4) throw DomainError("cells_time must be at least 4");
    if (extension < 0) throw DomainError("lattice extension must be non-negative");
    auto L = std::make_shared<CellLattice>(reference);
    L->n = n;
    L->cells_space = cells_space;
    L->cells_time = cells_time;
    L->extension = extension;
    L->dx = 2.0 * reference.radius() / cells_space;
    L->dt = reference.height() / cells_time;
    for (int d = 0; d < n; ++d) L->lower[d] = reference.center()[d] - reference.radius();
    L->t_lower = reference.t_begin();

    const Weight& w = reference.weight();
    const auto& sing = w.singular_points();
    const double e = -static_cast<double>(n);
    const std::size_t S = L->spatial();
    L->cell_w.assign(S, 0.0);
    L->cell_winv.assign(S, 0.0);
    parallel_for(S, [&](std::size_t i) {
        const Point c = L->centre(i);
        Point lo = c, hi = c;
        for (int d = 0; d < n; ++d) {
            lo[d] -= 0.5 * L->dx;
            hi[d] += 0.5 * L->dx;
        }
        L->cell_w[i] = integrate_box([&](const Point& x) { return w(x); }, lo, hi, n, sing);
        L->cell_winv[i] = integrate_box([&](const Point& x) { return std::pow(w(x), e); }, lo, hi, n, sing);
        if (!std::isfinite(L->cell_w[i]) || !std::isfinite(L->cell_winv[i])) {
            throw NumericalError("cell integral not finite at " + format_point(c, n));
        }
    });
    return L;
}

std::size_t CellLattice::spatial() const {
    return n == 1 ? static_cast<std::size_t>(cells_space)
                  : static_cast<std::size_t>(cells_space) * static_cast<std::size_t>(cells_space);
}

Point CellLattice::centre(std::size_t i) const {
    Point p{0.0, 0.0, 0.0};
    if (n == 1) {
        p[0] = lower[0] + (static_cast<double>(i) + 0.5) * dx;
    } else {
        p[0] = lower[0] + (static_cast<double>(i / cells_space) + 0.5) * dx;
        p[1] = lower[1] + (static_cast<double>(i % cells_space) + 0.5) * dx;
    }
    return p;
}

std::vector<std::size_t> CellLattice::footprint(const Point& x, double rho, bool closed) const {
    std::vector<std::size_t> out;
    int lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int d = 0; d < n; ++d) {
        lo[d] = std::max(0, static_cast<int>(std::floor((x[d] - rho - lower[d]) / dx)));
        hi[d] = std::min(cells_space - 1, static_cast<int>(std::ceil((x[d] + rho - lower[d]) / dx)));
    }
    const double r2 = rho * rho;
    const double eps = 1e-12 * r2;
    auto keep = [&](double d2) { return closed ? d2 <= r2 + eps : d2 < r2 - eps; };
    if (n == 1) {
        for (int a = lo[0]; a <= hi[0]; ++a) {
            const double c = lower[0] + (a + 0.5) * dx - x[0];
            if (keep(c * c)) out.push_back(static_cast<std::size_t>(a));
        }
        return out;
    }
    for (int a = lo[0]; a <= hi[0]; ++a) {
        const double c0 = lower[0] + (a + 0.5) * dx - x[0];
        for (int b = lo[1]; b <= hi[1]; ++b) {
            const double c1 = lower[1] + (b + 0.5) * dx - x[1];
            if (keep(c0 * c0 + c1 * c1)) out.push_back(static_cast<std::size_t>(a) * cells_space + b);
        }
    }
    return out;
}

bool CellLattice::footprint_inside(const Point& x, double rho) const {
    const double r = reference.radius();
    const double r2 = rho * rho * (1.0 + 1e-12);
    const int lo0 = static_cast<int>(std::floor((x[0] - rho - lower[0]) / dx));
    const int hi0 = static_cast<int>(std::ceil((x[0] + rho - lower[0]) / dx));
    const int lo1 = n == 1 ? 0 : static_cast<int>(std::floor((x[1] - rho - lower[1]) / dx));
    const int hi1 = n == 1 ? 0 : static_cast<int>(std::ceil((x[1] + rho - lower[1]) / dx));
    for (int a = lo0; a <= hi0; ++a) {
        for (int b = lo1; b <= hi1; ++b) {
            Point c{lower[0] + (a + 0.5) * dx, n == 1 ? 0.0 : lower[1] + (b + 0.5) * dx, 0.0};
            double d2 = 0.0;
            for (int d = 0; d < n; ++d) d2 += (c[d] - x[d]) * (c[d] - x[d]);
            if (d2 > r2) continue;
            if (a < 0 || a >= cells_space || b < 0 || (n == 2 && b >= cells_space)) return false;
            if (distance(c, reference.center(), n) > r * (1.0 + 1e-12)) return false;
        }
    }
    return true;
}

double CellLattice::height(const Point& x, double rho) const {
    const auto fp = footprint(x, rho, true);
    if (fp.empty()) throw DomainError("ball below the lattice resolution");
    double s = 0.0;
    for (auto i : fp) s += cell_winv[i];
    const double avg = s / (static_cast<double>(fp.size()) * std::pow(dx, n));
    return rho * rho * std::pow(avg, 1.0 / n);
}

CellSet CellSet::empty(std::shared_ptr<const CellLattice> lattice) {
    CellSet s;
    s.mask.assign(lattice->size(), 0);
    s.lattice = std::move(lattice);
    return s;
}

std::size_t CellSet::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double CellSet::measure() const {
    const std::size_t S = lattice->spatial();
    double total = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
        std::size_t c = 0;
        for (int k = 0; k < lattice->time_cells(); ++k) c += mask[lattice->index(k, i)];
        total += static_cast<double>(c) * lattice->cell_w[i];
    }
    return total * lattice->dt;
}

WeightedCylinder CandidateCylinder::cylinder(const Weight& w) const {
    return make_cylinder_with_height(w, x, s, rho, height, CylinderKind::C);
}

bool cylinders_disjoint(const CandidateCylinder& a, const CandidateCylinder& b, int n) {
    if (a.s <= b.s - b.height || b.s <= a.s - a.height) return true;
    return distance(a.x, b.x, n) >= a.rho + b.rho;
}

CandidateLattice candidate_lattice(const std::shared_ptr<const CellLattice>& L, int max_levels) {
    const int n = L->n;
    const double r = L->reference.radius();
    const Point y = L->reference.center();
    const double top = L->reference.time();
    const double bottom = L->reference.t_begin();
    CandidateLattice out;
    for (int j = 0;; ++j) {
        if (max_levels > 0 && j >= max_levels) break;
        const double rho = std::ldexp(r, -j);
        if (rho < 2.0 * L->dx * (1.0 - 1e-12)) break;
        out.levels = j + 1;
        const double step = 0.5 * rho;
        const int reach = static_cast<int>(std::floor(r / step + 1e-9));
        std::vector<Point> centres;
        for (int a = -reach; a <= reach; ++a) {
            for (int b = (n == 1 ? 0 : -reach); b <= (n == 1 ? 0 : reach); ++b) {
                const Point c{y[0] + a * step, n == 1 ? 0.0 : y[1] + b * step, 0.0};
                if (L->footprint_inside(c, rho)) centres.push_back(c);
            }
        }
        for (const Point& c : centres) {
            const double H = L->height(c, rho);
            const int stride = std::max(1, static_cast<int>(std::floor(H / (4.0 * L->dt))));
            for (int e = L->cells_time; e >= 0; e -= stride) {
                const double s = L->t_lower + e * L->dt;
                if (s > top + 1e-12 * L->dt) continue;
                if (s - H < bottom - 1e-9 * L->dt) break;
                CandidateCylinder cc;
                cc.x = c;
                cc.s = s;
                cc.rho = rho;
                cc.height = H;
                cc.level = j;
                out.all.push_back(cc);
            }
        }
    }
    if (out.all.empty()) throw DomainError("empty candidate lattice");
    return out;
}

namespace {

std::pair<int, int> time_range(const CellLattice& L, double lo, double hi) {
    const int a = std::max(0, static_cast<int>(std::floor((lo - L.t_lower) / L.dt)) - 1);
    const int b = std::min(L.time_cells() - 1, static_cast<int>(std::ceil((hi - L.t_lower) / L.dt)) + 1);
    return {a, b};
}

}  // namespace

void rasterize_outer(CellSet& set, const CandidateCylinder& c) {
    const CellLattice& L = *set.lattice;
    const auto fp = L.footprint(c.x, c.rho, true);
    const double lo = c.s - c.height, hi = c.s;
    const double tol = 1e-9 * L.dt;
    const auto [a, b] = time_range(L, lo, hi);
    for (int k = a; k <= b; ++k) {
        const double clo = L.t_lower + k * L.dt, chi = clo + L.dt;
        if (!(clo < hi - tol && chi > lo + tol)) continue;
        for (auto i : fp) set.mask[L.index(k, i)] = 1;
    }
}

void rasterize_inner(CellSet& set, const Point& x, double rho, double t_lo, double t_hi) {
    const CellLattice& L = *set.lattice;
    const auto fp = L.footprint(x, rho, false);
    if (fp.empty()) return;
    const double tol = 1e-9 * L.dt;
    const auto [a, b] = time_range(L, t_lo, t_hi);
    for (int k = a; k <= b; ++k) {
        const double tc = L.time_centre(k);
        if (!(tc > t_lo + tol && tc < t_hi - tol)) continue;
        for (auto i : fp) set.mask[L.index(k, i)] = 1;
    }
}

CellSet random_gamma(const std::shared_ptr<const CellLattice>& lattice, const CandidateLattice& cands, int count,
                     std::uint64_t seed, std::vector<CandidateCylinder>* parts) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < cands.all.size(); ++i) {
        if (cands.all[i].level >= 1 && cands.all[i].level <= 3) pool.push_back(i);
    }
    if (pool.empty()) throw DomainError("no lattice cylinders at levels 1..3");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    CellSet g = CellSet::empty(lattice);
    for (int c = 0; c < count; ++c) {
        const auto& cyl = cands.all[pool[pick(rng)]];
        rasterize_outer(g, cyl);
        if (parts) parts->push_back(cyl);
    }
    return g;
}

std::vector<CandidateCylinder> candidate_cylinders(const CellSet& gamma, double q, const CandidateLattice& cands) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("density threshold q must lie in (0,1)");
    if (cands.all.empty()) throw DomainError("empty candidate lattice");
    const CellLattice& L = *gamma.lattice;
    const std::size_t S = L.spatial();
    const int T = L.cells_time;
    // Prefix counts of gamma per spatial column over the reference time range.
    std::vector<std::uint32_t> prefix(S * static_cast<std::size_t>(T + 1), 0);
    for (std::size_t i = 0; i < S; ++i) {
        std::uint32_t run = 0;
        prefix[i * (T + 1)] = 0;
        for (int k = 0; k < T; ++k) {
            run += gamma.mask[L.index(k, i)];
            prefix[i * (T + 1) + k + 1] = run;
        }
    }
    auto covered = [&](std::size_t i, double u) {
        u = std::clamp(u, 0.0, static_cast<double>(T));
        const int k = std::min(T - 1, static_cast<int>(std::floor(u)));
        return prefix[i * (T + 1) + k] + (u - k) * gamma.mask[L.index(k, i)];
    };
    std::vector<double> density(cands.all.size(), 0.0);
    parallel_for(cands.all.size(), [&](std::size_t c) {
        const auto& cyl = cands.all[c];
        const auto fp = L.footprint(cyl.x, cyl.rho, true);
        const double ua = (cyl.s - cyl.height - L.t_lower) / L.dt;
        const double ub = (cyl.s - L.t_lower) / L.dt;
        double num = 0.0, den = 0.0;
        for (auto i : fp) {
            num += L.cell_w[i] * (covered(i, ub) - covered(i, ua));
            den += L.cell_w[i];
        }
        density[c] = den > 0.0 ? std::clamp(num * L.dt / (den * cyl.height), 0.0, 1.0) : 0.0;
    });
    std::vector<CandidateCylinder> out;
    for (std::size_t c = 0; c < cands.all.size(); ++c) {
        if (density[c] >= q) {
            out.push_back(cands.all[c]);
            out.back().density = density[c];
        }
    }
    return out;
}

namespace {

bool lex_less(const CandidateCylinder& a, const CandidateCylinder& b) {
    if (a.rho != b.rho) return a.rho > b.rho;
    for (int d = 0; d < kMaxDim; ++d) {
        if (a.x[d] != b.x[d]) return a.x[d] < b.x[d];
    }
    return a.s < b.s;
}

/// Buckets selected cylinders by spatial cell for intersection queries.
class SpatialHash {
public:
    SpatialHash(double cell, int n) : cell_(cell), n_(n) {}
    void insert(const CandidateCylinder& c, std::size_t id) {
        for_each_key(c, [&](long long k) { buckets_[k].push_back(id); });
    }
    template <class F>
    bool any(const CandidateCylinder& c, F&& pred) const {
        bool hit = false;
        for_each_key(c, [&](long long k) {
            if (hit) return;
            auto it = buckets_.find(k);
            if (it == buckets_.end()) return;
            for (auto id : it->second) {
                if (pred(id)) {
                    hit = true;
                    return;
                }
            }
        });
        return hit;
    }

private:
    template <class F>
    void for_each_key(const CandidateCylinder& c, F&& f) const {
        int lo[2] = {0, 0}, hi[2] = {0, 0};
        for (int d = 0; d < n_; ++d) {
            lo[d] = static_cast<int>(std::floor((c.x[d] - c.rho) / cell_));
            hi[d] = static_cast<int>(std::floor((c.x[d] + c.rho) / cell_));
        }
        for (int a = lo[0]; a <= hi[0]; ++a) {
            for (int b = lo[1]; b <= hi[1]; ++b) f((static_cast<long long>(a) << 32) ^ static_cast<long long>(b & 0xffffffff));
        }
    }
    double cell_;
    int n_;
    std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

}  // namespace

std::vector<CandidateCylinder> greedy_disjoint_selection(std::vector<CandidateCylinder> candidates, int n) {
    std::vector<CandidateCylinder> selected;
    if (candidates.empty()) return selected;
    std::sort(candidates.begin(), candidates.end(), lex_less);
    double rmin = candidates.front().rho;
    for (const auto& c : candidates) rmin = std::min(rmin, c.rho);
    SpatialHash hash(2.0 * rmin, n);
    for (const auto& c : candidates) {
        const bool blocked = hash.any(c, [&](std::size_t id) { return !cylinders_disjoint(c, selected[id], n); });
        if (blocked) continue;
        hash.insert(c, selected.size());
        selected.push_back(c);
    }
    return selected;
}

void build_E_sets(const std::vector<CandidateCylinder>& candidates, double eta, double l, CellSet& tildeE,
                  CellSet& hatE) {
    if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0,1)");
    if (!(l > 1.0)) throw DomainError("l must exceed 1");
    const CellLattice& L = *tildeE.lattice;
    const double t_max = L.t_lower + L.time_cells() * L.dt;
    for (const auto& c : candidates) {
        if (c.s + l * c.height > t_max * (1.0 + 1e-12) + 1e-12) {
            throw DomainError("lattice extension too short for l");
        }
    }
    for (const auto& c : candidates) {
        rasterize_inner(tildeE, c.x, eta * c.rho, c.s - c.height, c.s);
        rasterize_inner(hatE, c.x, eta * c.rho, c.s + c.height, c.s + l * c.height);
    }
}

CoveringResult run_covering(const CellSet& gamma, double q, double eta, double l, const CandidateLattice& cands) {
    CoveringResult res;
    res.q = q;
    res.eta = eta;
    res.l = l;
    res.xi1 = (l - 1.0) / (l + 1.0);
    res.qualifying = candidate_cylinders(gamma, q, cands);
    res.selected = greedy_disjoint_selection(res.qualifying, gamma.lattice->n);
    res.tildeE = CellSet::empty(gamma.lattice);
    res.hatE = CellSet::empty(gamma.lattice);
    build_E_sets(res.qualifying, eta, l, res.tildeE, res.hatE);
    res.w_gamma = gamma.measure();
    res.w_tildeE = res.tildeE.measure();
    res.w_hatE = res.hatE.measure();
    CellSet diff = CellSet::empty(gamma.lattice);
    for (std::size_t i = 0; i < diff.mask.size(); ++i) diff.mask[i] = gamma.mask[i] && !res.tildeE.mask[i];
    res.w_gamma_minus_tildeE = diff.measure();
    return res;
}

SelectionAudit audit_selection(const std::vector<CandidateCylinder>& qualifying,
                               const std::vector<CandidateCylinder>& selected, int n) {
    SelectionAudit a;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        for (std::size_t j = i + 1; j < selected.size(); ++j) {
            if (!cylinders_disjoint(selected[i], selected[j], n)) ++a.overlapping_pairs;
        }
    }
    auto same = [](const CandidateCylinder& u, const CandidateCylinder& v) {
        return u.rho == v.rho && u.s == v.s && u.x == v.x;
    };
    for (const auto& c : qualifying) {
        bool hit = false;
        for (const auto& s : selected) {
            if (same(c, s) || !cylinders_disjoint(c, s, n)) {
                hit = true;
                break;
            }
        }
        if (!hit) ++a.missed;
    }
    a.disjoint = a.overlapping_pairs == 0;
    a.maximal = a.missed == 0;
    return a;
}

Report verify_covering(const CellSet& gamma, const CoveringResult& result, double K0, double raster_tol) {
    if (gamma.lattice != result.tildeE.lattice || gamma.lattice != result.hatE.lattice) {
        throw DomainError("covering result was not built from this set");
    }
    if (!(K0 >= 1.0)) throw DomainError("K0 must be at least 1");
    const CellLattice& L = *gamma.lattice;
    Report rep("covering");
    rep.config["q"] = result.q;
    rep.config["eta"] = result.eta;
    rep.config["l"] = result.l;
    rep.config["K0"] = K0;
    rep.config["raster_tol"] = raster_tol;
    rep.config["lattice"] = {L.cells_space, L.cells_time, L.extension};

    // Gamma must stay inside the reference.
    bool inside = true;
    for (int k = L.cells_time; k < L.time_cells() && inside; ++k) {
        for (std::size_t i = 0; i < L.spatial(); ++i) {
            if (gamma.mask[L.index(k, i)]) {
                inside = false;
                break;
            }
        }
    }
    rep.check("gamma inside reference cylinder", inside);

    rep.check_le("w(Gamma \\ tildeE) <= tol w(Gamma)", result.w_gamma_minus_tildeE, raster_tol * result.w_gamma);
    rep.check_ge("w(hatE) >= xi1 w(tildeE)", result.w_hatE, result.xi1 * result.w_tildeE * (1.0 - raster_tol));

    // Per-column time fibers, one cell of slack per column.
    std::size_t bad = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < L.spatial(); ++i) {
        int te = 0, he = 0;
        for (int k = 0; k < L.time_cells(); ++k) {
            te += result.tildeE.mask[L.index(k, i)];
            he += result.hatE.mask[L.index(k, i)];
        }
        const double need = result.xi1 * te * (1.0 - raster_tol) - 1.0;
        if (he < need) {
            ++bad;
            worst = std::max(worst, need - he);
        }
    }
    rep.check("time fibers |hatE(x)| >= xi1 |tildeE(x)|", bad == 0,
              "violating columns " + std::to_string(bad) + ", worst deficit " + format_double(worst) + " cells");

    const auto audit = audit_selection(result.qualifying, result.selected, L.n);
    rep.check("selected cylinders pairwise disjoint", audit.disjoint,
              std::to_string(audit.overlapping_pairs) + " overlapping pairs");
    rep.check("selection maximal", audit.maximal, std::to_string(audit.missed) + " qualifying cylinders missed");

    const PaperConstants pc = derived_constants(L.n, K0, result.q);
    rep.summary["w_gamma"] = result.w_gamma;
    rep.summary["w_tildeE"] = result.w_tildeE;
    rep.summary["w_hatE"] = result.w_hatE;
    rep.summary["w_gamma_minus_tildeE"] = result.w_gamma_minus_tildeE;
    rep.summary["qualifying"] = result.qualifying.size();
    rep.summary["selected"] = result.selected.size();
    rep.summary["xi1"] = result.xi1;
    rep.summary["xi0_formula"] = pc.xi0;
    if (result.w_gamma > 0.0) {
        rep.summary["tildeE_over_gamma"] = result.w_tildeE / result.w_gamma;
        rep.fit("xi0_empirical", {result.w_tildeE / result.w_gamma});
    }
    return rep;
}

void write_covering_csv(const std::string& dir, const CellSet& gamma, const CoveringResult& result) {
    const CellLattice& L = *gamma.lattice;
    std::vector<std::string> head;
    for (int d = 0; d < L.n; ++d) head.push_back("x" + std::to_string(d + 1));
    std::vector<std::string> sel_head = head;
    for (const char* c : {"s", "rho", "height", "density"}) sel_head.emplace_back(c);
    std::vector<std::vector<double>> rows;
    for (const auto& c : result.selected) {
        std::vector<double> r;
        for (int d = 0; d < L.n; ++d) r.push_back(c.x[d]);
        r.insert(r.end(), {c.s, c.rho, c.height, c.density});
        rows.push_back(std::move(r));
    }
    write_csv((std::filesystem::path(dir) / "selected.csv").string(), sel_head, rows);

    std::vector<std::string> cell_head = head;
    for (const char* c : {"t", "gamma", "tildeE", "hatE"}) cell_head.emplace_back(c);
    rows.clear();
    for (int k = 0; k < L.time_cells(); ++k) {
        for (std::size_t i = 0; i < L.spatial(); ++i) {
            const auto id = L.index(k, i);
            if (!gamma.mask[id] && !result.tildeE.mask[id] && !result.hatE.mask[id]) continue;
            const Point c = L.centre(i);
            std::vector<double> r;
            for (int d = 0; d < L.n; ++d) r.push_back(c[d]);
            r.insert(r.end(), {L.time_centre(k), static_cast<double>(gamma.mask[id]),
                               static_cast<double>(result.tildeE.mask[id]), static_cast<double>(result.hatE.mask[id])});
            rows.push_back(std::move(r));
        }
    }
    write_csv((std::filesystem::path(dir) / "cells.csv").string(), cell_head, rows);
}

PaperConstants derived_constants(int n, double K0, double q0) {
    if (n < 1) throw DomainError("n must be at least 1");
    if (!(K0 >= 1.0)) throw DomainError("K0 must be at least 1");
    if (!(q0 > 0.0 && q0 < 1.0)) throw DomainError("q0 must lie in (0,1)");
    PaperConstants c;
    c.n = n;
    c.K0 = K0;
    c.q0 = q0;
    const double gap = (1.0 - q0) / (2.0 * std::pow(3.0, n + 2) * K0);
    c.xi0 = 1.0 + gap;
    c.l0 = (3.0 * c.xi0 + 1.0) / gap;
    c.xi1 = (c.l0 - 1.0) / (c.l0 + 1.0);
    c.identity_residual = std::abs(c.xi0 * c.xi1 - 0.5 * (1.0 + c.xi0));
    return c;
}

}  // namespace wrlab

#include "wrlab/pde.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "wrlab/ball_calculus.hpp"

namespace wrlab {

CoefficientField CoefficientField::identity(int n) {
    Mat a{};
    for (int i = 0; i < 3; ++i) entry(a, i, i) = 1.0;
    CoefficientField f = constant(n, a);
    f.kind_ = "identity";
    return f;
}

CoefficientField CoefficientField::constant(int n, const Mat& a) {
    check_dim(n);
    CoefficientField f;
    f.n_ = n;
    f.blocks_ = {a};
    f.kind_ = "constant";
    f.finish();
    return f;
}

CoefficientField CoefficientField::sample_dominant(int n, const Point& lower, double block, int count, double t0,
                                                   double bt, int tcount, std::uint64_t seed) {
    check_dim(n);
    if (!(block > 0.0) || !(bt > 0.0) || count < 1 || tcount < 1) {
        throw DomainError("coefficient blocks need positive sizes and counts");
    }
    CoefficientField f;
    f.n_ = n;
    f.lower_ = lower;
    f.block_ = block;
    f.count_ = count;
    f.t0_ = t0;
    f.bt_ = bt;
    f.tcount_ = tcount;
    f.kind_ = "dominant";
    std::size_t spatial = 1;
    for (int d = 0; d < n; ++d) spatial *= static_cast<std::size_t>(count);
    std::mt19937_64 rng(seed);
    f.blocks_.resize(spatial * static_cast<std::size_t>(tcount));
    for (auto& a : f.blocks_) {
        a.fill(0.0);
        double dmin = 2.0;
        for (int i = 0; i < n; ++i) {
            entry(a, i, i) = 1.0 + unit_draw(rng);
            dmin = std::min(dmin, entry(a, i, i));
        }
        if (n > 1) {
            const double b = 0.45 * dmin / (n - 1);
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    entry(a, i, j) = b * (2.0 * unit_draw(rng) - 1.0);
                    entry(a, j, i) = entry(a, i, j);
                }
            }
        }
    }
    f.finish();
    return f;
}

void CoefficientField::finish() {
    min_eig_ = std::numeric_limits<double>::infinity();
    max_eig_ = 0.0;
    margin_ = std::numeric_limits<double>::infinity();
    max_trace_ = 0.0;
    for (const auto& a : blocks_) {
        Eigen::MatrixXd m(n_, n_);
        double tr = 0.0;
        for (int i = 0; i < n_; ++i) {
            double off = 0.0;
            for (int j = 0; j < n_; ++j) {
                m(i, j) = entry(a, i, j);
                if (entry(a, i, j) != entry(a, j, i)) throw DomainError("coefficient matrix is not symmetric");
                if (j != i) off += std::abs(entry(a, i, j));
            }
            margin_ = std::min(margin_, entry(a, i, i) - off);
            tr += entry(a, i, i);
        }
        max_trace_ = std::max(max_trace_, tr);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        min_eig_ = std::min(min_eig_, es.eigenvalues().minCoeff());
        max_eig_ = std::max(max_eig_, es.eigenvalues().maxCoeff());
    }
    if (!(min_eig_ > 0.0)) throw DomainError("coefficient matrix is not positive definite");
    nu_ = std::min(min_eig_, 1.0 / max_eig_);
}

int CoefficientField::time_block(double t) const {
    if (tcount_ == 1) return 0;
    const int b = static_cast<int>(std::floor((t - t0_) / bt_ + 1e-9));
    return std::clamp(b, 0, tcount_ - 1);
}

const Mat& CoefficientField::at(const Point& x, double t) const {
    if (blocks_.size() == 1) return blocks_[0];
    std::size_t idx = 0;
    for (int d = 0; d < n_; ++d) {
        const int c = std::clamp(static_cast<int>(std::floor((x[d] - lower_[d]) / block_)), 0, count_ - 1);
        idx = idx * static_cast<std::size_t>(count_) + static_cast<std::size_t>(c);
    }
    std::size_t spatial = 1;
    for (int d = 0; d < n_; ++d) spatial *= static_cast<std::size_t>(count_);
    return blocks_[static_cast<std::size_t>(time_block(t)) * spatial + idx];
}

Json CoefficientField::describe() const {
    Json j;
    j["kind"] = kind_;
    j["n"] = n_;
    j["blocks"] = blocks_.size();
    j["nu"] = nu_;
    j["min_eigenvalue"] = min_eig_;
    j["max_eigenvalue"] = max_eig_;
    j["dominance_margin"] = margin_;
    return j;
}

std::vector<double> node_weights(const Grid& grid, const Weight& w) {
    grid.validate();
    if (w.dim() != grid.n) throw DomainError("weight and grid dimensions differ");
    const int n = grid.n;
    const double h = grid.h;
    // candidates rather than singular_points(): a truncated weight is finite at
    // the base's singular points but still varies on sub-cell scales there
    std::vector<Point> sing;
    w.node().singular_candidates(sing);
    std::vector<double> out(grid.spatial());
    parallel_for(out.size(), [&](std::size_t i) {
        const Point x = grid.node(i);
        bool near = false;
        for (const auto& p : sing) near = near || distance(p, x, n) <= 0.25 * h;
        double v;
        if (near) {
            Point lo = x, hi = x;
            for (int d = 0; d < n; ++d) {
                lo[d] -= 0.5 * h;
                hi[d] += 0.5 * h;
            }
            auto f = [&](const Point& y) { return w(y); };
            v = integrate_box(f, lo, hi, n, sing, 12) / std::pow(h, n);
            const double coarse = integrate_box(f, lo, hi, n, sing, 9) / std::pow(h, n);
            if (!(std::abs(v - coarse) <= 1e-2 * std::abs(v))) {
                throw DomainError("cell average of the weight does not converge near " + format_point(x, n) +
                                  "; the weight is not locally integrable there");
            }
        } else {
            v = w(x);
        }
        out[i] = v;
    });
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] > 0.0) || !std::isfinite(out[i])) {
            throw DomainError("weight is not a positive finite number at grid node " +
                              format_point(grid.node(i), n) + "; truncate or shift it");
        }
    }
    return out;
}

std::vector<StencilEntry> second_order_stencil(const Mat& a, int n, double h) {
    const double inv = 1.0 / (h * h);
    std::map<std::array<int, 3>, double> acc;
    auto add = [&](std::array<int, 3> o, double c) { acc[o] += c; };
    for (int i = 0; i < n; ++i) {
        std::array<int, 3> p{0, 0, 0}, m{0, 0, 0};
        p[i] = 1;
        m[i] = -1;
        add(p, entry(a, i, i) * inv);
        add(m, entry(a, i, i) * inv);
        add({0, 0, 0}, -2.0 * entry(a, i, i) * inv);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double b = entry(a, i, j);
            if (b == 0.0) continue;
            const int s = b > 0.0 ? 1 : -1;
            const double c = std::abs(b) * inv;
            std::array<int, 3> d1{0, 0, 0}, d2{0, 0, 0}, pi{0, 0, 0}, mi{0, 0, 0}, pj{0, 0, 0}, mj{0, 0, 0};
            d1[i] = 1;
            d1[j] = s;
            d2[i] = -1;
            d2[j] = -s;
            pi[i] = 1;
            mi[i] = -1;
            pj[j] = 1;
            mj[j] = -1;
            add(d1, c);
            add(d2, c);
            add(pi, -c);
            add(mi, -c);
            add(pj, -c);
            add(mj, -c);
            add({0, 0, 0}, 2.0 * c);
        }
    }
    std::vector<StencilEntry> out;
    for (const auto& [o, c] : acc) {
        if (c != 0.0 || o == std::array<int, 3>{0, 0, 0}) out.push_back({o, c});
    }
    return out;
}

namespace {

struct FlatStencil {
    std::vector<long> offsets;
    std::vector<double> coeffs;
    std::vector<std::size_t> opposite;  ///< entry with the negated offset
};

/// Stencils keyed by coefficient block address.
class StencilCache {
public:
    StencilCache(const Grid& g, const CoefficientField& a) : g_(g), a_(a) {
        if (a.dominance_margin() < -1e-14) {
            throw DomainError("coefficient matrix is not diagonally dominant; the cross stencil is not monotone");
        }
    }
    const FlatStencil& at(const Point& x, double t) {
        const Mat& m = a_.at(x, t);
        auto it = cache_.find(&m);
        if (it != cache_.end()) return it->second;
        FlatStencil fs;
        for (const auto& e : second_order_stencil(m, g_.n, g_.h)) {
            fs.offsets.push_back(g_.offset(e.offset));
            fs.coeffs.push_back(e.coeff);
        }
        fs.opposite.resize(fs.offsets.size());
        for (std::size_t e = 0; e < fs.offsets.size(); ++e) {
            const auto it = std::find(fs.offsets.begin(), fs.offsets.end(), -fs.offsets[e]);
            fs.opposite[e] = static_cast<std::size_t>(it - fs.offsets.begin());
        }
        return cache_.emplace(&m, std::move(fs)).first->second;
    }

private:
    const Grid& g_;
    const CoefficientField& a_;
    std::unordered_map<const Mat*, FlatStencil> cache_;
};

/// Fraction s in (0, 1] of the segment x -> y inside the ball B(c, r), given
/// x inside and y not.
double exit_fraction(const Point& x, const Point& y, const Point& c, double r, int n) {
    double pd = 0.0, dd = 0.0, pp = 0.0;
    for (int a = 0; a < n; ++a) {
        const double p = x[a] - c[a], d = y[a] - x[a];
        pd += p * d;
        dd += d * d;
        pp += p * p;
    }
    const double s = (-pd + std::sqrt(std::max(0.0, pd * pd - dd * (pp - r * r)))) / dd;
    // Very short arms only cost conditioning; the data point moves by < 1e-3 h.
    return std::clamp(s, 1e-3, 1.0);
}

/// Row of the discrete operator at interior node i of level k in which every
/// 1D difference (stencil entries o and -o) whose arm leaves the ball slice is
/// replaced by its Shortley-Weller form. Returns false when no arm is cut.
struct CutRow {
    double centre = 0.0;
    std::vector<std::pair<std::size_t, double>> nodes;
    std::vector<std::pair<Point, double>> cuts;
};

bool cut_row(const SpaceTimeDomain& dom, int k, std::size_t i, const FlatStencil& st, std::vector<double>& theta,
             CutRow& row) {
    const Grid& G = dom.grid;
    const std::size_t E = st.offsets.size();
    theta.assign(E, 1.0);
    const Point x = G.node(i);
    const Point c = dom.centre(k);
    bool cut = false;
    for (std::size_t e = 0; e < E; ++e) {
        if (st.offsets[e] == 0) continue;
        const auto j = static_cast<std::size_t>(static_cast<long>(i) + st.offsets[e]);
        if (!dom.is(k, j, NodeKind::boundary)) continue;
        theta[e] = exit_fraction(x, G.node(j), c, dom.radius, G.n);
        if (theta[e] < 1.0 - 1e-12) {
            cut = true;
        } else {
            theta[e] = 1.0;
        }
    }
    if (!cut) return false;
    row.centre = 0.0;
    row.nodes.clear();
    row.cuts.clear();
    for (std::size_t e = 0; e < E; ++e) {
        if (st.offsets[e] == 0) continue;
        const double tp = theta[e], tm = theta[st.opposite[e]];
        const double ce = 2.0 * st.coeffs[e] / (tp * (tp + tm));
        const auto j = static_cast<std::size_t>(static_cast<long>(i) + st.offsets[e]);
        if (tp < 1.0) {
            const Point y = G.node(j);
            Point p = x;
            for (int a = 0; a < G.n; ++a) p[a] += tp * (y[a] - x[a]);
            row.cuts.emplace_back(p, ce);
        } else {
            row.nodes.emplace_back(j, ce);
        }
        row.centre -= ce;
    }
    return true;
}

bool cuts_sphere(const SpaceTimeDomain& dom, const BoundaryFunction& g_at) {
    return g_at && dom.radius > 0.0 && dom.centre;
}

void check_nodes(const std::vector<double>& w_nodes, const Grid& g) {
    if (w_nodes.size() != g.spatial()) throw DomainError("node weights do not match the grid");
}

}  // namespace

void apply_L_level(int k, const std::vector<double>& prev, const std::vector<double>& cur, const SpaceTimeDomain& dom,
                   const std::vector<double>& w_nodes, const CoefficientField& a, std::vector<double>& out,
                   const BoundaryFunction& g_at) {
    const Grid& g = dom.grid;
    check_nodes(w_nodes, g);
    const std::size_t S = g.spatial();
    if (prev.size() != S || cur.size() != S) throw DomainError("level slices do not match the grid");
    out.assign(S, 0.0);
    if (k <= dom.first_level || k > dom.last_level) return;
    StencilCache cache(g, a);
    const double t = g.time(k);
    const bool sw = cuts_sphere(dom, g_at);
    std::vector<double> theta;
    CutRow row;
    for (std::size_t i = 0; i < S; ++i) {
        if (!dom.is(k, i, NodeKind::interior)) continue;
        const FlatStencil& st = cache.at(g.node(i), t);
        double lap = 0.0;
        if (sw && cut_row(dom, k, i, st, theta, row)) {
            lap = row.centre * cur[i];
            for (const auto& [j, c] : row.nodes) lap += c * cur[j];
            for (const auto& [p, c] : row.cuts) lap += c * g_at(k, p);
        } else {
            for (std::size_t e = 0; e < st.offsets.size(); ++e) {
                lap += st.coeffs[e] * cur[static_cast<long>(i) + st.offsets[e]];
            }
        }
        out[i] = (cur[i] - prev[i]) / g.tau - w_nodes[i] * lap;
    }
}

GridFunction apply_L(const GridFunction& u, const SpaceTimeDomain& dom, const std::vector<double>& w_nodes,
                     const CoefficientField& a, const BoundaryFunction& g_at) {
    const Grid& g = dom.grid;
    check_nodes(w_nodes, g);
    if (u.values.size() != g.size()) throw DomainError("grid function does not match the domain");
    GridFunction out(g, 0.0);
    const std::size_t S = g.spatial();
    std::vector<double> prev, cur, lu;
    for (int k = dom.first_level + 1; k <= dom.last_level; ++k) {
        prev.assign(u.values.begin() + g.index(k - 1, 0), u.values.begin() + g.index(k - 1, 0) + S);
        cur.assign(u.values.begin() + g.index(k, 0), u.values.begin() + g.index(k, 0) + S);
        apply_L_level(k, prev, cur, dom, w_nodes, a, lu, g_at);
        std::copy(lu.begin(), lu.end(), out.values.begin() + g.index(k, 0));
    }
    return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

struct LevelSystem {
    std::vector<std::size_t> unknowns;  ///< spatial node per row
    std::vector<long> row_of;           ///< row per spatial node, -1 otherwise
    SpMat A;
    /// Boundary couplings: (row, spatial node, coefficient moved to the rhs).
    std::vector<std::tuple<std::size_t, std::size_t, double>> coupling;
    /// Boundary points on the sphere: (row, point, coefficient).
    std::vector<std::tuple<std::size_t, Point, double>> cuts;
    int time_block = -1;
    Point centre{};
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> iterative;
    bool direct = true;
};

}  // namespace

SolveStats solve_levels(const SpaceTimeDomain& dom, const std::vector<double>& w_nodes, const CoefficientField& a,
                        const NodeFunction& f, const NodeFunction& g,
                        const std::function<void(int, const std::vector<double>&)>& on_level, double tol) {
    return solve_levels(dom, w_nodes, a, f, g, BoundaryFunction{}, on_level, tol);
}

SolveStats solve_levels(const SpaceTimeDomain& dom, const std::vector<double>& w_nodes, const CoefficientField& a,
                        const NodeFunction& f, const NodeFunction& g, const BoundaryFunction& g_at,
                        const std::function<void(int, const std::vector<double>&)>& on_level, double tol) {
    const bool sw = cuts_sphere(dom, g_at);
    std::vector<double> theta;
    CutRow row;
    const Grid& G = dom.grid;
    check_nodes(w_nodes, G);
    if (a.dim() != G.n) throw DomainError("coefficient field and grid dimensions differ");
    StencilCache cache(G, a);
    const std::size_t S = G.spatial();
    SolveStats stats;
    std::vector<double> prev(S, 0.0), cur(S, 0.0);

    for (std::size_t i = 0; i < S; ++i) {
        if (dom.kind[G.index(dom.first_level, i)] != NodeKind::outside) cur[i] = g(dom.first_level, i);
    }
    on_level(dom.first_level, cur);
    ++stats.levels;

    LevelSystem sys;
    sys.direct = G.n <= 2;
    bool have = false;
    for (int k = dom.first_level + 1; k <= dom.last_level; ++k) {
        std::swap(prev, cur);
        const double t = G.time(k);
        std::vector<std::size_t> unknowns;
        for (std::size_t i = 0; i < S; ++i) {
            if (dom.is(k, i, NodeKind::interior)) unknowns.push_back(i);
        }
        const int tb = a.time_block(t);
        const Point centre = sw ? dom.centre(k) : Point{};
        if (!have || tb != sys.time_block || unknowns != sys.unknowns || centre != sys.centre) {
            sys.unknowns = std::move(unknowns);
            sys.time_block = tb;
            sys.centre = centre;
            sys.cuts.clear();
            sys.row_of.assign(S, -1);
            for (std::size_t r = 0; r < sys.unknowns.size(); ++r) sys.row_of[sys.unknowns[r]] = static_cast<long>(r);
            sys.coupling.clear();
            std::vector<Eigen::Triplet<double>> trip;
            for (std::size_t r = 0; r < sys.unknowns.size(); ++r) {
                const std::size_t i = sys.unknowns[r];
                const FlatStencil& st = cache.at(G.node(i), t);
                trip.emplace_back(static_cast<int>(r), static_cast<int>(r), 1.0 / G.tau);
                if (sw && cut_row(dom, k, i, st, theta, row)) {
                    trip.emplace_back(static_cast<int>(r), static_cast<int>(r), -w_nodes[i] * row.centre);
                    for (const auto& [j, c] : row.nodes) {
                        if (sys.row_of[j] >= 0) {
                            trip.emplace_back(static_cast<int>(r), static_cast<int>(sys.row_of[j]), -w_nodes[i] * c);
                        } else if (dom.is(k, j, NodeKind::boundary)) {
                            sys.coupling.emplace_back(r, j, w_nodes[i] * c);
                        } else {
                            throw DomainError("interior node has a stencil neighbour outside the domain");
                        }
                    }
                    for (const auto& [p, c] : row.cuts) sys.cuts.emplace_back(r, p, w_nodes[i] * c);
                    continue;
                }
                for (std::size_t e = 0; e < st.offsets.size(); ++e) {
                    const auto j = static_cast<std::size_t>(static_cast<long>(i) + st.offsets[e]);
                    const double c = w_nodes[i] * st.coeffs[e];
                    if (sys.row_of[j] >= 0) {
                        trip.emplace_back(static_cast<int>(r), static_cast<int>(sys.row_of[j]), -c);
                    } else if (dom.is(k, j, NodeKind::boundary)) {
                        sys.coupling.emplace_back(r, j, c);
                    } else {
                        throw DomainError("interior node has a stencil neighbour outside the domain");
                    }
                }
            }
            const auto m = static_cast<int>(sys.unknowns.size());
            sys.A.resize(m, m);
            sys.A.setFromTriplets(trip.begin(), trip.end());
            sys.A.makeCompressed();
            if (sys.direct) {
                sys.lu.compute(sys.A);
                if (sys.lu.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed");
            } else {
                sys.iterative.setTolerance(tol * 1e-2);
                sys.iterative.setMaxIterations(2000);
                sys.iterative.compute(sys.A);
                if (sys.iterative.info() != Eigen::Success) throw NumericalError("ILUT preconditioner failed");
            }
            ++stats.factorizations;
            have = true;
        }
        const std::size_t m = sys.unknowns.size();
        stats.max_unknowns = std::max(stats.max_unknowns, m);
        std::fill(cur.begin(), cur.end(), 0.0);
        for (std::size_t i = 0; i < S; ++i) {
            if (dom.is(k, i, NodeKind::boundary)) cur[i] = g(k, i);
        }
        Eigen::VectorXd b(static_cast<Eigen::Index>(m));
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t i = sys.unknowns[r];
            if (dom.kind[G.index(k - 1, i)] == NodeKind::outside) {
                throw DomainError("interior node without a value at the previous level");
            }
            b[static_cast<Eigen::Index>(r)] = f(k, i) + prev[i] / G.tau;
        }
        for (const auto& [r, j, c] : sys.coupling) b[static_cast<Eigen::Index>(r)] += c * cur[j];
        for (const auto& [r, p, c] : sys.cuts) b[static_cast<Eigen::Index>(r)] += c * g_at(k, p);
        Eigen::VectorXd x = sys.direct ? Eigen::VectorXd(sys.lu.solve(b)) : Eigen::VectorXd(sys.iterative.solve(b));
        const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
        const double res = m ? (sys.A * x - b).cwiseAbs().maxCoeff() / scale : 0.0;
        if (!(res <= tol)) {
            throw NumericalError("linear solve residual " + format_double(res) + " exceeds " + format_double(tol) +
                                 " at level " + std::to_string(k));
        }
        stats.max_residual = std::max(stats.max_residual, res);
        for (std::size_t r = 0; r < m; ++r) cur[sys.unknowns[r]] = x[static_cast<Eigen::Index>(r)];
        on_level(k, cur);
        ++stats.levels;
    }
    return stats;
}

std::pair<GridFunction, SolveStats> solve_dirichlet(const SpaceTimeDomain& dom, const std::vector<double>& w_nodes,
                                                    const CoefficientField& a, const NodeFunction& f,
                                                    const NodeFunction& g, double tol) {
    GridFunction u(dom.grid, 0.0);
    const std::size_t S = dom.grid.spatial();
    const SolveStats st = solve_levels(
        dom, w_nodes, a, f, g,
        [&](int k, const std::vector<double>& v) { std::copy(v.begin(), v.end(), &u.values[k * S]); }, tol);
    return {std::move(u), st};
}

std::pair<GridFunction, SolveStats> solve_dirichlet(const DirichletProblem& p, double tol) {
    const Grid& G = p.domain.grid;
    if (p.f.values.size() != G.size() || p.g.values.size() != G.size()) {
        throw DomainError("right-hand side or boundary data do not match the domain grid");
    }
    return solve_dirichlet(
        p.domain, p.w_nodes, p.a, [&](int k, std::size_t i) { return p.f.at(k, i); },
        [&](int k, std::size_t i) { return p.g.at(k, i); }, tol);
}

namespace {

struct HalfPlane {
    double a0, a1, b;  ///< a . l >= b
};

/// Randomized incremental 2D LP (feasibility) inside the box |l_d| <= L.
bool feasible_2d(const std::vector<HalfPlane>& cons, double L) {
    const double c0 = 0.6180339887498949, c1 = 0.3819660112501051;
    double l0 = -L, l1 = -L;
    for (std::size_t i = 0; i < cons.size(); ++i) {
        const HalfPlane& h = cons[i];
        if (h.a0 * l0 + h.a1 * l1 >= h.b) continue;
        const double na = h.a0 * h.a0 + h.a1 * h.a1;
        if (na == 0.0) return false;
        const double p0 = h.a0 * h.b / na, p1 = h.a1 * h.b / na;
        const double d0 = -h.a1, d1 = h.a0;
        double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
        auto bound = [&](double den, double num) {
            // den * s >= num
            if (den > 0.0) {
                lo = std::max(lo, num / den);
            } else if (den < 0.0) {
                hi = std::min(hi, num / den);
            } else if (num > 0.0) {
                lo = std::numeric_limits<double>::infinity();
            }
        };
        bound(d0, -L - p0);
        bound(-d0, -L + p0);
        bound(d1, -L - p1);
        bound(-d1, -L + p1);
        // Grid-collinear constraints meet in exact vertices; intervals closing
        // within rounding are treated as a single point.
        auto closed = [&] { return lo > hi + 1e-12 * (1.0 + std::abs(lo) + std::abs(hi)); };
        for (std::size_t j = 0; j < i && !closed(); ++j) {
            const HalfPlane& q = cons[j];
            const double den = q.a0 * d0 + q.a1 * d1;
            const double num = q.b - (q.a0 * p0 + q.a1 * p1);
            if (std::abs(den) <= 1e-14 * std::sqrt(q.a0 * q.a0 + q.a1 * q.a1) * std::sqrt(na)) {
                if (num > 0.0) return false;
                continue;
            }
            bound(den, num);
        }
        if (closed() || std::isnan(lo) || std::isnan(hi)) return false;
        const double s = lo > hi ? 0.5 * (lo + hi) : ((c0 * d0 + c1 * d1) > 0.0 ? lo : hi);
        l0 = p0 + s * d0;
        l1 = p1 + s * d1;
    }
    return true;
}

/// Running maxima over earlier levels, stored block by block (8^n nodes per
/// block) with block maxima and boxes for pruning.
class ContactLevel {
public:
    explicit ContactLevel(const Grid& g) : g_(g) {
        const int nb = (g.nx + kB - 1) / kB;
        const std::size_t S = g.spatial();
        std::size_t blocks = 1;
        for (int d = 0; d < g.n; ++d) blocks *= static_cast<std::size_t>(nb);
        std::vector<std::vector<std::size_t>> members(blocks);
        for (std::size_t i = 0; i < S; ++i) {
            const auto m = g.multi(i);
            std::size_t b = 0;
            for (int d = 0; d < g.n; ++d) b = b * static_cast<std::size_t>(nb) + static_cast<std::size_t>(m[d] / kB);
            members[b].push_back(i);
        }
        slot_.assign(S, 0);
        for (const auto& mem : members) {
            Box box;
            box.start = order_.size();
            for (auto i : mem) {
                const Point p = g.node(i);
                slot_[i] = order_.size();
                order_.push_back(i);
                x_.push_back(p[0]);
                y_.push_back(g.n > 1 ? p[1] : 0.0);
                box.lo[0] = std::min(box.lo[0], p[0]);
                box.hi[0] = std::max(box.hi[0], p[0]);
                box.lo[1] = std::min(box.lo[1], g.n > 1 ? p[1] : 0.0);
                box.hi[1] = std::max(box.hi[1], g.n > 1 ? p[1] : 0.0);
            }
            box.end = order_.size();
            boxes_.push_back(box);
        }
        M_.assign(S, kNone);
    }

    void absorb(int k, const GridFunction& u, const SpaceTimeDomain& dom) {
        for (std::size_t i = 0; i < g_.spatial(); ++i) {
            if (dom.kind[g_.index(k, i)] == NodeKind::outside) continue;
            double& v = M_[slot_[i]];
            v = std::max(v, u.at(k, i));
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (auto& b : boxes_) {
            b.max = kNone;
            for (std::size_t j = b.start; j < b.end; ++j) {
                if (M_[j] == kNone) continue;
                b.max = std::max(b.max, M_[j]);
                lo = std::min(lo, M_[j]);
                hi = std::max(hi, M_[j]);
            }
        }
        range_ = hi >= lo ? hi - lo : 0.0;
    }

    double M(std::size_t i) const { return M_[slot_[i]]; }
    double eps() const { return 1e-10 * range_; }

    /// Does the slope (l0, l1) support the graph of M at node x with value m?
    bool supports(std::size_t x, double m, double l0, double l1) const {
        const double x0 = x_[slot_[x]], y0 = y_[slot_[x]];
        const double top = m + eps();
        for (const auto& b : boxes_) {
            if (b.max == kNone) continue;
            const double lmin = std::min(l0 * (b.lo[0] - x0), l0 * (b.hi[0] - x0)) +
                                std::min(l1 * (b.lo[1] - y0), l1 * (b.hi[1] - y0));
            if (b.max - lmin <= top) continue;
            for (std::size_t j = b.start; j < b.end; ++j) {
                if (M_[j] - (l0 * (x_[j] - x0) + l1 * (y_[j] - y0)) > top) return false;
            }
        }
        return true;
    }

    /// Exact decision for node x with current value m.
    bool contact(std::size_t x, double m, std::mt19937_64& rng) const {
        if (range_ == 0.0) return true;
        const int n = g_.n;
        const double e = eps();
        const auto mx = g_.multi(x);
        auto value = [&](int a, int b) {
            if (a < 0 || a >= g_.nx || b < 0 || b >= g_.nx) return kNone;
            return M_[slot_[g_.flat({a, b, 0})]];
        };
        if (n == 1) {
            const double x0 = x_[slot_[x]];
            double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < M_.size(); ++j) {
                if (M_[j] == kNone || order_[j] == x) continue;
                const double dy = x_[j] - x0;
                const double c = (M_[j] - m - e) / dy;
                if (dy > 0.0) {
                    lo = std::max(lo, c);
                } else {
                    hi = std::min(hi, c);
                }
            }
            return lo <= hi;
        }
        // Secants along lattice lines through x: one slope must fit both rays.
        static const int kDirs[16][2] = {{1, 0}, {0, 1},  {1, 1},  {1, -1}, {1, 2}, {2, 1},  {1, -2}, {2, -1},
                                         {1, 3}, {3, 1},  {1, -3}, {3, -1}, {2, 3}, {3, 2},  {2, -3}, {3, -2}};
        for (const auto& d : kDirs) {
            double need = -std::numeric_limits<double>::infinity();
            double allow = std::numeric_limits<double>::infinity();
            for (int sgn : {1, -1}) {
                for (int a = 1;; ++a) {
                    const int qa = mx[0] + sgn * a * d[0], qb = mx[1] + sgn * a * d[1];
                    if (qa < 0 || qa >= g_.nx || qb < 0 || qb >= g_.nx) break;
                    const double v = value(qa, qb);
                    if (v == kNone) continue;
                    const double c = (v - m - e) / a;
                    if (sgn > 0) {
                        need = std::max(need, c);
                    } else {
                        allow = std::min(allow, -c);
                    }
                }
            }
            if (need > allow) return false;
        }
        // Candidate slopes from centred and one-sided differences.
        std::array<std::vector<double>, 2> cand;
        for (int d = 0; d < 2; ++d) {
            const int pa = mx[0] + (d == 0), pb = mx[1] + (d == 1);
            const int qa = mx[0] - (d == 0), qb = mx[1] - (d == 1);
            const double vp = value(pa, pb), vq = value(qa, qb);
            if (vp != kNone && vq != kNone) cand[d].push_back((vp - vq) / (2.0 * g_.h));
            if (vp != kNone) cand[d].push_back((vp - m) / g_.h);
            if (vq != kNone) cand[d].push_back((m - vq) / g_.h);
            if (cand[d].empty()) cand[d].push_back(0.0);
        }
        for (double c0 : cand[0]) {
            for (double c1 : cand[1]) {
                if (supports(x, m, c0, c1)) return true;
            }
        }
        const double x0 = x_[slot_[x]], y0 = y_[slot_[x]];
        std::vector<HalfPlane> cons;
        cons.reserve(M_.size());
        for (std::size_t j = 0; j < M_.size(); ++j) {
            if (M_[j] == kNone || order_[j] == x) continue;
            cons.push_back({x_[j] - x0, y_[j] - y0, M_[j] - m - e});
        }
        std::shuffle(cons.begin(), cons.end(), rng);
        // Supporting slopes at hull vertices of a grid need at most
        // ~ nx range / h; a larger box only costs precision.
        const double L = 16.0 * g_.nx * range_ / g_.h;
        return feasible_2d(cons, L);
    }

private:
    static constexpr int kB = 8;
    static constexpr double kNone = -std::numeric_limits<double>::infinity();
    struct Box {
        std::size_t start = 0, end = 0;
        double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        double hi[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        double max = -std::numeric_limits<double>::infinity();
    };

    const Grid& g_;
    std::vector<std::size_t> slot_;   ///< node -> storage position
    std::vector<std::size_t> order_;  ///< storage position -> node
    std::vector<double> x_, y_, M_;
    std::vector<Box> boxes_;
    double range_ = 0.0;
};

}  // namespace

NodeMask upper_contact_set(const GridFunction& u, const SpaceTimeDomain& dom, bool include_boundary) {
    const Grid& g = dom.grid;
    if (g.n > 2) throw DomainError("upper contact sets are implemented for n <= 2");
    if (u.values.size() != g.size()) throw DomainError("grid function does not match the domain");
    NodeMask mask(g);
    ContactLevel level(g);
    std::mt19937_64 rng(0x5eed);
    for (int k = dom.first_level; k <= dom.last_level; ++k) {
        level.absorb(k, u, dom);
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            const NodeKind kd = dom.kind[g.index(k, i)];
            if (kd == NodeKind::outside || (kd == NodeKind::boundary && !include_boundary)) continue;
            // An earlier value above the current one refutes every slope.
            const double m = u.at(k, i);
            if (m + level.eps() < level.M(i)) continue;
            if (level.contact(i, m, rng)) mask.flags[g.index(k, i)] = 1;
        }
    }
    return mask;
}

NodeMask upper_contact_set_bruteforce(const GridFunction& u, const SpaceTimeDomain& dom) {
    if (dom.grid.n != 2) throw DomainError("brute-force contact set is implemented for n = 2");
    if (u.values.size() != dom.grid.size()) throw DomainError("grid function does not match the domain");
    const Grid& g = dom.grid;
    NodeMask mask(g);
    std::vector<double> M(g.spatial(), -std::numeric_limits<double>::infinity());
    for (int k = dom.first_level; k <= dom.last_level; ++k) {
        std::vector<std::size_t> pts;
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            if (dom.kind[g.index(k, i)] != NodeKind::outside) M[i] = std::max(M[i], u.at(k, i));
            if (M[i] > -std::numeric_limits<double>::infinity()) pts.push_back(i);
        }
        double lo = 1e300, hi = -1e300;
        for (auto i : pts) {
            lo = std::min(lo, M[i]);
            hi = std::max(hi, M[i]);
        }
        const double eps = 1e-10 * (hi - lo);
        for (std::size_t x = 0; x < g.spatial(); ++x) {
            if (dom.kind[g.index(k, x)] == NodeKind::outside) continue;
            const double m = u.at(k, x);
            if (m + eps < M[x]) continue;
            const Point px = g.node(x);
            bool refuted = false;
            for (std::size_t a = 0; a < pts.size() && !refuted; ++a) {
                const Point pa = g.node(pts[a]);
                if (pts[a] == x) continue;
                for (std::size_t b = a + 1; b < pts.size() && !refuted; ++b) {
                    if (pts[b] == x) continue;
                    const Point pb = g.node(pts[b]);
                    // x on segment [a, b]
                    const double ux = pb[0] - pa[0], uy = pb[1] - pa[1];
                    const double cross = ux * (px[1] - pa[1]) - uy * (px[0] - pa[0]);
                    if (std::abs(cross) < 1e-12) {
                        const double len2 = ux * ux + uy * uy;
                        const double s = (ux * (px[0] - pa[0]) + uy * (px[1] - pa[1])) / len2;
                        if (s >= -1e-12 && s <= 1.0 + 1e-12 && (1.0 - s) * M[pts[a]] + s * M[pts[b]] > m + eps) {
                            refuted = true;
                        }
                    }
                    for (std::size_t c = b + 1; c < pts.size() && !refuted; ++c) {
                        if (pts[c] == x) continue;
                        const Point pc = g.node(pts[c]);
                        const double det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
                        if (std::abs(det) < 1e-12) continue;
                        const double l1 =
                            ((px[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (px[1] - pa[1])) / det;
                        const double l2 =
                            ((pb[0] - pa[0]) * (px[1] - pa[1]) - (px[0] - pa[0]) * (pb[1] - pa[1])) / det;
                        const double l0 = 1.0 - l1 - l2;
                        if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
                        if (l0 * M[pts[a]] + l1 * M[pts[b]] + l2 * M[pts[c]] > m + eps) refuted = true;
                    }
                }
            }
            if (!refuted) mask.flags[g.index(k, x)] = 1;
        }
    }
    return mask;
}


AbpResult abp_check(const GridFunction& u, const SpaceTimeDomain& dom, const std::vector<double>& w_nodes,
                    const std::vector<double>& w_neg_n_nodes, const CoefficientField& a, double radius) {
    const Grid& g = dom.grid;
    check_nodes(w_neg_n_nodes, g);
    if (!(radius > 0.0)) throw DomainError("ABP radius must be positive");
    AbpResult r;
    for (int k = dom.first_level; k <= dom.last_level; ++k) {
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            const NodeKind kd = dom.kind[g.index(k, i)];
            const double v = std::max(0.0, u.at(k, i));
            if (kd == NodeKind::interior) r.sup_interior = std::max(r.sup_interior, v);
            if (kd == NodeKind::boundary) r.sup_boundary = std::max(r.sup_boundary, v);
        }
    }
    r.excess = r.sup_interior - r.sup_boundary;
    const GridFunction Lu = apply_L(u, dom, w_nodes, a);
    const NodeMask contact = upper_contact_set(u, dom, false);
    const int n = g.n;
    const double cell = std::pow(g.h, n) * g.tau;
    double sum = 0.0;
    for (int k = dom.first_level + 1; k <= dom.last_level; ++k) {
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            if (!contact.at(k, i) || !dom.is(k, i, NodeKind::interior)) continue;
            ++r.contact_nodes;
            const double v = std::max(0.0, Lu.at(k, i));
            sum += std::pow(v, n + 1) * w_neg_n_nodes[i] * cell;
        }
    }
    r.core = std::pow(radius, static_cast<double>(n) / (n + 1)) * std::pow(sum, 1.0 / (n + 1));
    if (r.core > 0.0) {
        r.fitted_N0 = r.excess / r.core;
    } else {
        r.fitted_N0 = std::numeric_limits<double>::quiet_NaN();
        r.violation = r.excess > 0.0;
    }
    return r;
}

Report abp_report(const AbpResult& r) {
    Report rep("abp");
    rep.summary["sup_interior"] = r.sup_interior;
    rep.summary["sup_boundary"] = r.sup_boundary;
    rep.summary["excess"] = r.excess;
    rep.summary["core"] = r.core;
    rep.summary["contact_nodes"] = r.contact_nodes;
    rep.summary["fitted_N0"] = std::isfinite(r.fitted_N0) ? Json(r.fitted_N0) : Json(nullptr);
    rep.check("excess controlled by the contact-set norm", !r.violation,
              r.violation ? "positive excess with an empty contact integral" : "");
    if (std::isfinite(r.fitted_N0)) rep.fit("N0", {r.fitted_N0});
    return rep;
}

double barrier_value(double rho, double lambda, const Point& ell, const Point& x, double t, int n) {
    if (!(rho > 0.0)) throw DomainError("barrier radius must be positive");
    double z2 = 0.0;
    for (int d = 0; d < n; ++d) {
        const double z = x[d] - t * ell[d];
        z2 += z * z;
    }
    const double phi = std::max(0.0, rho * rho - z2);
    return std::exp(-lambda * t) * phi * phi / std::pow(rho, 4);
}

BarrierModel::BarrierModel(const SlantCylinder& V, double K, const Ball& enclosing, const Weight& w,
                           const CoefficientField& a, const Grid& grid, const QuadratureSpec& spec)
    : V_(V), K_(K), w_(w), a_(a), rho_(V.rho) {
    if (!(K >= 1.0)) throw DomainError("barrier needs K >= 1");
    if (a.dim() != V.n || w.dim() != V.n) throw DomainError("barrier dimensions differ");
    ell_ = V.drift();
    w_avg_ = ball_average(w, enclosing, 1.0, spec);
    nu_ = a.nu();
    double gmax = 0.0;
    std::size_t nodes = 0;
    for (int k = 0; k < grid.nt; ++k) {
        const double t = grid.time(k) - V.t0;
        if (t < -1e-12 || t > V.s0 - V.t0 + 1e-12) continue;
        for (std::size_t i = 0; i < grid.spatial(); ++i) {
            Point x = grid.node(i);
            for (int d = 0; d < V.n; ++d) x[d] -= V.x0[d];
            double z2 = 0.0;
            for (int d = 0; d < V.n; ++d) z2 += (x[d] - t * ell_[d]) * (x[d] - t * ell_[d]);
            if (z2 > rho_ * rho_ * (1.0 + 1e-12)) continue;
            gmax = std::max(gmax, std::abs(g1_at(x, t)));
            ++nodes;
        }
    }
    if (nodes == 0) throw DomainError("barrier grid has no nodes in the closed tube");
    N_tilde_ = gmax / (K_ * w_avg_);
    N1_ = N_tilde_ * N_tilde_ / (16.0 * nu_);
    lambda_ = N1_ * K_ * K_ * w_avg_ / (rho_ * rho_);
}

double BarrierModel::g1_at(const Point& x, double t) const {
    Point xo = x;
    for (int d = 0; d < V_.n; ++d) xo[d] += V_.x0[d];
    const Mat& a = a_.at(xo, t + V_.t0);
    double lz = 0.0, tr = 0.0;
    for (int d = 0; d < V_.n; ++d) {
        lz += ell_[d] * (x[d] - t * ell_[d]);
        tr += entry(a, d, d);
    }
    return 4.0 * lz + 4.0 * w_avg_ * tr + 8.0 * w_avg_ * nu_;
}

BarrierPoint BarrierModel::eval(const Point& x, double t) const {
    const int n = V_.n;
    BarrierPoint p;
    Point z{0.0, 0.0, 0.0};
    double z2 = 0.0;
    for (int d = 0; d < n; ++d) {
        z[d] = x[d] - t * ell_[d];
        z2 += z[d] * z[d];
    }
    const double r2 = rho_ * rho_;
    p.Phi = r2 - z2;
    const double e = std::exp(-lambda_ * t) / (r2 * r2);
    p.v = p.Phi > 0.0 ? e * p.Phi * p.Phi : 0.0;
    p.g1 = g1_at(x, t);
    p.quadratic = -lambda_ * p.Phi * p.Phi + p.g1 * p.Phi - 8.0 * nu_ * r2 * w_avg_;
    p.quadratic_bound = -lambda_ * p.Phi * p.Phi + N_tilde_ * K_ * w_avg_ * p.Phi - 8.0 * nu_ * r2 * w_avg_;
    Point xo = x;
    for (int d = 0; d < n; ++d) xo[d] += V_.x0[d];
    const Mat& a = a_.at(xo, t + V_.t0);
    const double wx = w_(xo);
    double tr = 0.0, azz = 0.0, lz = 0.0;
    for (int i = 0; i < n; ++i) {
        tr += entry(a, i, i);
        lz += ell_[i] * z[i];
        for (int j = 0; j < n; ++j) azz += entry(a, i, j) * z[i] * z[j];
    }
    p.g2 = (wx - w_avg_) * (4.0 * p.Phi * tr + 8.0 * nu_ * p.Phi - 8.0 * nu_ * r2);
    p.Lv = e * (-lambda_ * p.Phi * p.Phi + 4.0 * p.Phi * lz - 8.0 * wx * azz + 4.0 * wx * p.Phi * tr);
    p.Lv_bound = e * (p.quadratic + p.g2);
    return p;
}

double weighted_norm(const GridFunction& v, double p, const std::vector<double>& weight_nodes,
                     const SpaceTimeDomain& dom) {
    if (!(p > 0.0)) throw DomainError("norm exponent must be positive");
    const Grid& g = dom.grid;
    if (!weight_nodes.empty()) check_nodes(weight_nodes, g);
    const double cell = std::pow(g.h, g.n) * g.tau;
    double sum = 0.0;
    for (int k = dom.first_level + 1; k <= dom.last_level; ++k) {
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            if (!dom.is(k, i, NodeKind::interior)) continue;
            const double wt = weight_nodes.empty() ? 1.0 : weight_nodes[i];
            sum += std::pow(std::abs(v.at(k, i)), p) * wt * cell;
        }
    }
    return std::pow(sum, 1.0 / p);
}

void hessian_frobenius_level(int k, const std::vector<double>& cur, const SpaceTimeDomain& dom,
                             std::vector<double>& out) {
    const Grid& g = dom.grid;
    const int n = g.n;
    const std::size_t S = g.spatial();
    if (cur.size() != S) throw DomainError("level slice does not match the grid");
    out.assign(S, 0.0);
    if (k <= dom.first_level || k > dom.last_level) return;
    const double inv = 1.0 / (g.h * g.h);
    const double* uk = cur.data();
    for (std::size_t i = 0; i < S; ++i) {
        if (!dom.is(k, i, NodeKind::interior)) continue;
        const long c = static_cast<long>(i);
        double s = 0.0;
        for (int d = 0; d < n; ++d) {
            std::array<int, 3> e{0, 0, 0};
            e[d] = 1;
            const long o = g.offset(e);
            const double dd = (uk[c + o] - 2.0 * uk[c] + uk[c - o]) * inv;
            s += dd * dd;
            for (int d2 = d + 1; d2 < n; ++d2) {
                std::array<int, 3> pp{0, 0, 0}, pm{0, 0, 0};
                pp[d] = 1;
                pp[d2] = 1;
                pm[d] = 1;
                pm[d2] = -1;
                const long opp = g.offset(pp), opm = g.offset(pm);
                const double dx = (uk[c + opp] - uk[c + opm] - uk[c - opm] + uk[c - opp]) * 0.25 * inv;
                s += 2.0 * dx * dx;
            }
        }
        out[i] = std::sqrt(s);
    }
}

GridFunction hessian_frobenius(const GridFunction& u, const SpaceTimeDomain& dom) {
    const Grid& g = dom.grid;
    GridFunction out(g, 0.0);
    const std::size_t S = g.spatial();
    std::vector<double> cur, hk;
    for (int k = dom.first_level + 1; k <= dom.last_level; ++k) {
        cur.assign(u.values.begin() + g.index(k, 0), u.values.begin() + g.index(k, 0) + S);
        hessian_frobenius_level(k, cur, dom, hk);
        std::copy(hk.begin(), hk.end(), out.values.begin() + g.index(k, 0));
    }
    return out;
}

GridFunction time_derivative(const GridFunction& u, const SpaceTimeDomain& dom) {
    const Grid& g = dom.grid;
    GridFunction out(g, 0.0);
    for (int k = dom.first_level + 1; k <= dom.last_level; ++k) {
        for (std::size_t i = 0; i < g.spatial(); ++i) {
            if (dom.is(k, i, NodeKind::interior)) out.at(k, i) = (u.at(k, i) - u.at(k - 1, i)) / g.tau;
        }
    }
    return out;
}

GridFunction sample(const Grid& grid, const std::function<double(const Point&, double)>& fn) {
    GridFunction out(grid, 0.0);
    for (int k = 0; k < grid.nt; ++k) {
        const double t = grid.time(k);
        for (std::size_t i = 0; i < grid.spatial(); ++i) out.at(k, i) = fn(grid.node(i), t);
    }
    return out;
}

}  // namespace wrlab

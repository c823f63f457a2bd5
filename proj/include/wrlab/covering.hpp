#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wrlab/geometry.hpp"
#include "wrlab/report.hpp"

namespace wrlab {

/// Space-time cells over a reference C-cylinder: cells_space per spatial axis
/// across [y - r, y + r], cells_time across (s - H, s), plus `extension`
/// times as many cells above s for the forward sets. Per spatial cell the
/// integrals of w and w^{-n} are precomputed once; w is time independent, so a
/// cell's w-measure is its spatial integral times dt.
struct CellLattice {
    explicit CellLattice(WeightedCylinder ref) : reference(std::move(ref)) {}

    WeightedCylinder reference;
    int n = 2;
    int cells_space = 64;
    int cells_time = 128;
    int extension = 3;
    double dx = 0.0;
    double dt = 0.0;
    Point lower{0.0, 0.0, 0.0};
    double t_lower = 0.0;
    std::vector<double> cell_w;
    std::vector<double> cell_winv;

    static std::shared_ptr<const CellLattice> build(const WeightedCylinder& reference, int cells_space = 64,
                                                    int cells_time = 128, int extension = 3);

    std::size_t spatial() const;
    int time_cells() const { return cells_time * (1 + extension); }
    std::size_t size() const { return spatial() * static_cast<std::size_t>(time_cells()); }
    std::size_t index(int k, std::size_t i) const { return static_cast<std::size_t>(k) * spatial() + i; }
    Point centre(std::size_t i) const;
    double time_centre(int k) const { return t_lower + (k + 0.5) * dt; }
    /// Spatial cells whose centre lies in the ball (closed or open).
    std::vector<std::size_t> footprint(const Point& x, double rho, bool closed) const;
    /// Closed footprint of B_rho(x) lies in the reference's closed footprint.
    bool footprint_inside(const Point& x, double rho) const;
    /// rho^2 ((w^{-n})_{B_rho(x)})^{1/n} from cell sums over the closed footprint.
    double height(const Point& x, double rho) const;
};

struct CellSet {
    std::shared_ptr<const CellLattice> lattice;
    std::vector<std::uint8_t> mask;

    static CellSet empty(std::shared_ptr<const CellLattice> lattice);
    std::size_t count() const;
    double measure() const;
};

/// A lattice cylinder B_rho(x) x (s - height, s).
struct CandidateCylinder {
    Point x{0.0, 0.0, 0.0};
    double s = 0.0;
    double rho = 0.0;
    double height = 0.0;
    double density = 0.0;
    int level = 0;

    WeightedCylinder cylinder(const Weight& w) const;
};

bool cylinders_disjoint(const CandidateCylinder& a, const CandidateCylinder& b, int n);

/// Dyadic candidate ladder rho_j = r 2^{-j}, j = 0..levels-1, centres on the
/// rho/2 lattice about y, tops on time-cell edges with stride
/// max(1, floor(height / 4 dt)) cells. Containment in the reference is
/// decided on cells: the closed footprint must lie in the reference's.
struct CandidateLattice {
    int levels = 0;
    std::vector<CandidateCylinder> all;  ///< density left at 0
};

/// Levels run down to the smallest radius covering at least two cells.
CandidateLattice candidate_lattice(const std::shared_ptr<const CellLattice>& lattice, int max_levels = 0);

/// Outer rasterization: closed spatial footprint, cells whose time interval
/// meets (s - height, s).
void rasterize_outer(CellSet& set, const CandidateCylinder& c);
/// Inner rasterization: open spatial footprint, cell centres strictly inside
/// the time interval (t_lo, t_hi).
void rasterize_inner(CellSet& set, const Point& x, double rho, double t_lo, double t_hi);

/// Union of `count` random lattice cylinders from levels 1..3.
CellSet random_gamma(const std::shared_ptr<const CellLattice>& lattice, const CandidateLattice& cands, int count,
                     std::uint64_t seed, std::vector<CandidateCylinder>* parts = nullptr);

std::vector<CandidateCylinder> candidate_cylinders(const CellSet& gamma, double q, const CandidateLattice& cands);

/// Largest radius first, ties by lexicographic (x, s); keeps each candidate
/// disjoint from everything kept before it.
std::vector<CandidateCylinder> greedy_disjoint_selection(std::vector<CandidateCylinder> candidates, int n);

struct CoveringResult {
    std::vector<CandidateCylinder> qualifying;
    std::vector<CandidateCylinder> selected;
    CellSet tildeE;
    CellSet hatE;
    double w_gamma = 0.0;
    double w_tildeE = 0.0;
    double w_hatE = 0.0;
    double w_gamma_minus_tildeE = 0.0;
    double q = 0.5;
    double eta = 0.9;
    double l = 3.0;
    double xi1 = 0.5;
};

void build_E_sets(const std::vector<CandidateCylinder>& candidates, double eta, double l, CellSet& tildeE,
                  CellSet& hatE);

CoveringResult run_covering(const CellSet& gamma, double q, double eta, double l, const CandidateLattice& cands);

/// Disjointness and maximality of the selection against the qualifying list.
struct SelectionAudit {
    bool disjoint = true;
    bool maximal = true;
    std::size_t overlapping_pairs = 0;
    std::size_t missed = 0;
};
SelectionAudit audit_selection(const std::vector<CandidateCylinder>& qualifying,
                               const std::vector<CandidateCylinder>& selected, int n);

Report verify_covering(const CellSet& gamma, const CoveringResult& result, double K0, double raster_tol = 0.02);

void write_covering_csv(const std::string& dir, const CellSet& gamma, const CoveringResult& result);

struct PaperConstants {
    int n = 2;
    double K0 = 1.0;
    double q0 = 0.5;
    double xi0 = 0.0;
    double l0 = 0.0;
    double xi1 = 0.0;
    /// |xi0 xi1 - (1 + xi0)/2|
    double identity_residual = 0.0;
};

PaperConstants derived_constants(int n, double K0, double q0);

}  // namespace wrlab

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wrlab/geometry.hpp"
#include "wrlab/grid.hpp"
#include "wrlab/report.hpp"
#include "wrlab/weights.hpp"

namespace wrlab {

/// Row-major 3x3 storage; only the leading n x n block is used.
using Mat = std::array<double, 9>;

inline double& entry(Mat& a, int i, int j) { return a[3 * i + j]; }
inline double entry(const Mat& a, int i, int j) { return a[3 * i + j]; }

/// Symmetric coefficients a_ij(x,t), piecewise constant on space-time blocks.
class CoefficientField {
public:
    static CoefficientField identity(int n);
    static CoefficientField constant(int n, const Mat& a);
    /// Blocks of side `block` covering `count`^n cells from `lower`, and time
    /// blocks of length `bt` from `t0` (`tcount` of them). Diagonal entries in
    /// [1, 2]; off-diagonals bounded by 0.45 min(a_ii) / (n - 1), so every row
    /// is strictly dominant and the eigenvalues lie in [0.55, 2.9].
    static CoefficientField sample_dominant(int n, const Point& lower, double block, int count, double t0, double bt,
                                            int tcount, std::uint64_t seed);

    int dim() const { return n_; }
    const Mat& at(const Point& x, double t) const;
    int time_block(double t) const;
    /// Ellipticity constant nu with sampled eigenvalues in [nu, 1/nu].
    double nu() const { return nu_; }
    double min_eigenvalue() const { return min_eig_; }
    double max_eigenvalue() const { return max_eig_; }
    /// min over blocks and rows of a_ii - sum_{j != i} |a_ij|.
    double dominance_margin() const { return margin_; }
    double max_trace() const { return max_trace_; }
    Json describe() const;

private:
    void finish();
    int n_ = 2;
    Point lower_{0.0, 0.0, 0.0};
    double block_ = 1.0;
    int count_ = 1;
    double t0_ = 0.0;
    double bt_ = 1.0;
    int tcount_ = 1;
    std::vector<Mat> blocks_;
    double nu_ = 1.0;
    double min_eig_ = 1.0;
    double max_eig_ = 1.0;
    double margin_ = 1.0;
    double max_trace_ = 0.0;
    std::string kind_ = "identity";
};

/// Weight values at spatial nodes: point values, except nodes within h/4 of a
/// singular point of the weight or of any weight it was built from (so
/// truncations keep the cell average), which take the cell average over the
/// node's cell. Throws
/// DomainError when a value is not a positive finite number.
std::vector<double> node_weights(const Grid& grid, const Weight& w);

/// (offset, coefficient) pairs with sum_o c_o u(x + o h) ~ a_ij D_ij u.
/// Cross terms use the sign-adapted 7-point stencil, exact on quadratics; all
/// non-centre coefficients are >= 0 when a is diagonally dominant.
struct StencilEntry {
    std::array<int, 3> offset;
    double coeff;
};
std::vector<StencilEntry> second_order_stencil(const Mat& a, int n, double h);

/// Boundary data at arbitrary points of a level, used on ball-slice domains to
/// place Dirichlet values where grid lines cross the sphere.
using BoundaryFunction = std::function<double(int level, const Point& x)>;

/// L u = u_t - w a_ij D_ij u with backward time differences, at interior nodes
/// of levels after the bottom slice. Other entries are zero. With `g_at` set on
/// a ball-slice domain, rows next to the sphere use the Shortley-Weller form of
/// each 1D difference of the stencil and read boundary values from `g_at`.
GridFunction apply_L(const GridFunction& u, const SpaceTimeDomain& dom, const std::vector<double>& w_nodes,
                     const CoefficientField& a, const BoundaryFunction& g_at = {});
/// Same at one level from the spatial slices of levels k - 1 and k.
void apply_L_level(int k, const std::vector<double>& prev, const std::vector<double>& cur, const SpaceTimeDomain& dom,
                   const std::vector<double>& w_nodes, const CoefficientField& a, std::vector<double>& out,
                   const BoundaryFunction& g_at = {});

/// Node-level accessors used for right-hand sides and boundary data.
using NodeFunction = std::function<double(int level, std::size_t node)>;

struct DirichletProblem {
    SpaceTimeDomain domain;
    std::vector<double> w_nodes;
    CoefficientField a = CoefficientField::identity(2);
    GridFunction f;  ///< read at interior nodes
    GridFunction g;  ///< read at boundary nodes
};

struct SolveStats {
    int levels = 0;
    int factorizations = 0;
    double max_residual = 0.0;
    std::size_t max_unknowns = 0;
};

/// Implicit Euler, one sparse solve per level; factorizations are reused while
/// the interior pattern and the coefficient time block do not change. Each
/// level's values (full spatial slice) are passed to `on_level`. Residuals are
/// relative to max(1, |rhs|_inf).
SolveStats solve_levels(const SpaceTimeDomain& dom, const std::vector<double>& w_nodes, const CoefficientField& a,
                        const NodeFunction& f, const NodeFunction& g,
                        const std::function<void(int, const std::vector<double>&)>& on_level, double tol = 1e-10);
/// Same with boundary data on the sphere (see apply_L); `g` still supplies the
/// bottom slice and shell nodes whose grid line does not cut the sphere.
SolveStats solve_levels(const SpaceTimeDomain& dom, const std::vector<double>& w_nodes, const CoefficientField& a,
                        const NodeFunction& f, const NodeFunction& g, const BoundaryFunction& g_at,
                        const std::function<void(int, const std::vector<double>&)>& on_level, double tol = 1e-10);

std::pair<GridFunction, SolveStats> solve_dirichlet(const DirichletProblem& p, double tol = 1e-10);
/// Same, with functional data.
std::pair<GridFunction, SolveStats> solve_dirichlet(const SpaceTimeDomain& dom, const std::vector<double>& w_nodes,
                                                    const CoefficientField& a, const NodeFunction& f,
                                                    const NodeFunction& g, double tol = 1e-10);

/// Nodes (x,t) of the domain admitting l with u(y,s) <= u(x,t) + l.(y - x) for
/// every domain node (y,s), s <= t. Exact: local certificates first, then a
/// randomized incremental LP over all earlier nodes. n <= 2.
NodeMask upper_contact_set(const GridFunction& u, const SpaceTimeDomain& dom, bool include_boundary = true);
/// Reference for small grids (n = 2): a node is off the set iff some pair or
/// triple of earlier nodes has it in its convex hull with the interpolated
/// running maximum above its value. Same 1e-10 * range slack. O(N^4) per level.
NodeMask upper_contact_set_bruteforce(const GridFunction& u, const SpaceTimeDomain& dom);

struct AbpResult {
    double sup_interior = 0.0;   ///< sup over interior nodes of u+
    double sup_boundary = 0.0;   ///< sup over boundary nodes of u+
    double excess = 0.0;
    double core = 0.0;           ///< r^{n/(n+1)} ||(Lu)+||_{L^{n+1}(contact, w^{-n})}
    double fitted_N0 = 0.0;      ///< excess / core, NaN when core = 0
    std::size_t contact_nodes = 0;
    bool violation = false;      ///< core = 0 with positive excess
};

AbpResult abp_check(const GridFunction& u, const SpaceTimeDomain& dom, const std::vector<double>& w_nodes,
                    const std::vector<double>& w_neg_n_nodes, const CoefficientField& a, double radius);
Report abp_report(const AbpResult& r);

/// Barrier of the slant prop-up argument in coordinates where X0 = (0,0).
struct BarrierPoint {
    double Phi = 0.0;
    double v = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    double quadratic = 0.0;  ///< -lambda Phi^2 + g1 Phi - 8 nu rho^2 (w)_B
    /// Same with g1 replaced by its fitted bound N~ K (w)_B.
    double quadratic_bound = 0.0;
    double Lv = 0.0;         ///< exact L v with the given a and w
    double Lv_bound = 0.0;   ///< e^{-lambda t} rho^{-4} (quadratic + g2)
};

class BarrierModel {
public:
    /// Fits N~ = max |g1| / (K (w)_B) over the nodes of the closed tube on the
    /// given grid; the tube is V translated so that X0 = (0,0).
    BarrierModel(const SlantCylinder& V, double K, const Ball& enclosing, const Weight& w, const CoefficientField& a,
                 const Grid& grid, const QuadratureSpec& spec = {});

    BarrierPoint eval(const Point& x, double t) const;
    double lambda() const { return lambda_; }
    double N_tilde() const { return N_tilde_; }
    double N1() const { return N1_; }
    double w_avg() const { return w_avg_; }
    double nu() const { return nu_; }
    const SlantCylinder& tube() const { return V_; }

private:
    double g1_at(const Point& x, double t) const;
    SlantCylinder V_;
    double K_;
    Weight w_;
    CoefficientField a_;
    Point ell_{0.0, 0.0, 0.0};
    double rho_;
    double w_avg_ = 1.0;
    double nu_ = 1.0;
    double N_tilde_ = 0.0;
    double N1_ = 0.0;
    double lambda_ = 0.0;
};

/// Barrier value alone; rho must be positive.
double barrier_value(double rho, double lambda, const Point& ell, const Point& x, double t, int n);

/// (sum over interior nodes of levels after the bottom of |v|^p W h^n tau)^{1/p}.
double weighted_norm(const GridFunction& v, double p, const std::vector<double>& weight_nodes,
                     const SpaceTimeDomain& dom);
/// Frobenius norm of the discrete Hessian (same stencils as apply_L with a = I
/// plus centred cross differences) at interior nodes.
GridFunction hessian_frobenius(const GridFunction& u, const SpaceTimeDomain& dom);
void hessian_frobenius_level(int k, const std::vector<double>& cur, const SpaceTimeDomain& dom,
                             std::vector<double>& out);
/// Backward time difference at interior nodes.
GridFunction time_derivative(const GridFunction& u, const SpaceTimeDomain& dom);

/// Grid function from a point/time expression, at every grid node.
GridFunction sample(const Grid& grid, const std::function<double(const Point&, double)>& fn);

}  // namespace wrlab

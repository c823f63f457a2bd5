#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wrlab/common.hpp"
#include "wrlab/quadrature.hpp"

namespace wrlab {

enum class SingularKind { blowUp, vanish, undefined };

/// Result of a checked evaluation: either a finite non-negative value or a
/// singular tag.
class WeightValue {
public:
    static WeightValue regular(double v) { return WeightValue(v, false, SingularKind::undefined); }
    static WeightValue singular(SingularKind k) { return WeightValue(0.0, true, k); }

    bool is_singular() const { return singular_; }
    SingularKind kind() const { return kind_; }
    double value() const;

private:
    WeightValue(double v, bool s, SingularKind k) : value_(v), singular_(s), kind_(k) {}
    double value_;
    bool singular_;
    SingularKind kind_;
};

struct ApClaim {
    double p = 1.5;
    double bound = 1.0;
};

struct TruncationMode {
    enum class Kind { upper, lower, band };
    Kind kind = Kind::upper;
    double lower = 0.0;
    double upper = 0.0;

    static TruncationMode upper_at(double k) { return {Kind::upper, 0.0, k}; }
    static TruncationMode lower_at(double k) { return {Kind::lower, k, 0.0}; }
    static TruncationMode band(double s, double tau) { return {Kind::band, s, tau}; }
    std::string describe() const;
};

namespace detail {
class WeightNode;
}

/// Immutable weight function on R^n. Copies share the underlying tree.
class Weight {
public:
    static Weight constant(double c, int n);
    /// |x - center|^alpha. With claim_a1n the constructor enforces alpha in (-n, 1)
    /// and records the origin-ball A_{1+1/n} value as the claimed bound.
    static Weight power(double alpha, const Point& center, int n, bool claim_a1n = false);
    static Weight logtype(const Point& center, int n);
    static Weight product(const std::vector<Weight>& factors);
    static Weight weighted_sum(const std::vector<std::pair<double, Weight>>& terms);
    /// Pointwise power w^e; used for duals such as w^{-n}.
    static Weight power_of(const Weight& base, double exponent);

    int dim() const { return n_; }

    /// Fast path. At singular points returns the limit (+inf for blow-up, 0 for
    /// vanishing, NaN when undefined); quadrature never samples there.
    double operator()(const Point& x) const;

    /// Checked evaluation with dimension check and singular tagging.
    WeightValue eval(std::span<const double> x) const;

    const std::vector<Point>& singular_points() const { return singular_; }
    const std::optional<ApClaim>& claimed_ap_class() const { return claim_; }
    Weight with_claim(const ApClaim& claim) const;

    /// Centre about which the weight is radially symmetric. Constants report
    /// radial_any() instead.
    std::optional<Point> radial_center() const;
    bool radial_any() const;
    std::vector<Sphere> feature_spheres() const;

    /// Hints for integrands of the form F(w(x)).
    IntegrandHints hints() const;

    /// Canonical text form, parseable by parse_weight.
    std::string spec_string() const;

    const detail::WeightNode& node() const { return *node_; }
    explicit Weight(std::shared_ptr<const detail::WeightNode> node, std::optional<ApClaim> claim = std::nullopt);

private:
    std::shared_ptr<const detail::WeightNode> node_;
    int n_ = 2;
    std::vector<Point> singular_;
    std::optional<ApClaim> claim_;
};

WeightValue eval_weight(const Weight& w, std::span<const double> x);

Weight truncate(const Weight& w, const TruncationMode& mode);

/// Convolution with the scaled normalized bump. Evaluation runs ball quadrature
/// at rel_tol; radially symmetric bases go through a lazily filled radial
/// profile table.
Weight mollify(const Weight& w, double eps, double rel_tol = 1e-9);

/// c_n such that c_n exp(-1/(1-|x|^2)) has unit mass on B_1.
double mollifier_constant(int n);
double mollifier(const Point& x, int n);

namespace detail {

struct RadialInfo {
    bool radial = false;
    bool any = false;
    Point center{0.0, 0.0, 0.0};
};

class WeightNode {
public:
    virtual ~WeightNode() = default;
    virtual double value(const Point& x) const = 0;
    virtual int dim() const = 0;
    virtual void singular_candidates(std::vector<Point>& out) const = 0;
    virtual RadialInfo radial() const = 0;
    virtual void spheres(std::vector<Sphere>& out) const { (void)out; }
    /// Radius r with value = level on the sphere |x - centre| = r, if the node
    /// is radial and monotone there.
    virtual std::optional<double> level_radius(double level) const {
        (void)level;
        return std::nullopt;
    }
    virtual std::string describe() const = 0;
};

}  // namespace detail

}  // namespace wrlab

#include "wrlab/weights.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <mutex>
#include <unordered_map>

namespace wrlab {

using detail::RadialInfo;
using detail::WeightNode;

double WeightValue::value() const {
    if (singular_) throw DomainError("weight evaluated at a singular point");
    return value_;
}

std::string TruncationMode::describe() const {
    switch (kind) {
        case Kind::upper: return "upper(k=" + format_double(upper) + ")";
        case Kind::lower: return "lower(k=" + format_double(lower) + ")";
        case Kind::band: return "band(s=" + format_double(lower) + ",tau=" + format_double(upper) + ")";
    }
    return "";
}

namespace {

std::string center_suffix(const Point& c, int n) {
    bool zero = true;
    for (int i = 0; i < n; ++i) zero = zero && c[i] == 0.0;
    return zero ? std::string() : ",center=" + format_point(c, n);
}

RadialInfo merge_radial(const RadialInfo& a, const RadialInfo& b, int n) {
    if (!a.radial || !b.radial) return {};
    if (a.any) return b;
    if (b.any) return a;
    if (distance(a.center, b.center, n) == 0.0) return a;
    return {};
}

class ConstantNode final : public WeightNode {
public:
    ConstantNode(double c, int n) : c_(c), n_(n) {}
    double value(const Point&) const override { return c_; }
    int dim() const override { return n_; }
    void singular_candidates(std::vector<Point>&) const override {}
    RadialInfo radial() const override { return {true, true, {}}; }
    std::string describe() const override { return "constant(c=" + format_double(c_) + ")"; }

private:
    double c_;
    int n_;
};

class PowerNode final : public WeightNode {
public:
    PowerNode(double alpha, const Point& c, int n) : alpha_(alpha), c_(c), n_(n) {}
    double value(const Point& x) const override {
        const double r = distance(x, c_, n_);
        if (alpha_ == 0.0) return 1.0;
        if (r == 0.0) return alpha_ > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return std::pow(r, alpha_);
    }
    int dim() const override { return n_; }
    void singular_candidates(std::vector<Point>& out) const override {
        if (alpha_ != 0.0) out.push_back(c_);
    }
    RadialInfo radial() const override { return {true, false, c_}; }
    std::optional<double> level_radius(double level) const override {
        if (alpha_ == 0.0 || !(level > 0.0)) return std::nullopt;
        return std::pow(level, 1.0 / alpha_);
    }
    std::string describe() const override {
        return "power(alpha=" + format_double(alpha_) + center_suffix(c_, n_) + ")";
    }

private:
    double alpha_;
    Point c_;
    int n_;
};

class LogNode final : public WeightNode {
public:
    LogNode(const Point& c, int n) : c_(c), n_(n) {}
    double value(const Point& x) const override {
        const double r = distance(x, c_, n_);
        if (r == 0.0) return std::numeric_limits<double>::infinity();
        return r <= kEdge ? -std::log(r) : 1.0;
    }
    int dim() const override { return n_; }
    void singular_candidates(std::vector<Point>& out) const override { out.push_back(c_); }
    RadialInfo radial() const override { return {true, false, c_}; }
    void spheres(std::vector<Sphere>& out) const override { out.push_back({c_, kEdge}); }
    std::optional<double> level_radius(double level) const override {
        if (!(level > 1.0)) return std::nullopt;
        return std::exp(-level);
    }
    std::string describe() const override {
        const std::string c = center_suffix(c_, n_);
        return "log(" + (c.empty() ? c : c.substr(1)) + ")";
    }

private:
    static constexpr double kEdge = 0.36787944117144233;  // e^{-1}
    Point c_;
    int n_;
};

class ProductNode final : public WeightNode {
public:
    explicit ProductNode(std::vector<Weight> f) : f_(std::move(f)) {}
    double value(const Point& x) const override {
        double v = 1.0;
        for (const auto& w : f_) v *= w(x);
        return v;
    }
    int dim() const override { return f_.front().dim(); }
    void singular_candidates(std::vector<Point>& out) const override {
        for (const auto& w : f_) w.node().singular_candidates(out);
    }
    RadialInfo radial() const override {
        RadialInfo r{true, true, {}};
        for (const auto& w : f_) r = merge_radial(r, w.node().radial(), dim());
        return r;
    }
    void spheres(std::vector<Sphere>& out) const override {
        for (const auto& w : f_) w.node().spheres(out);
    }
    std::string describe() const override {
        std::string s = "product(";
        for (std::size_t i = 0; i < f_.size(); ++i) s += (i ? "," : "") + f_[i].spec_string();
        return s + ")";
    }

private:
    std::vector<Weight> f_;
};

class SumNode final : public WeightNode {
public:
    explicit SumNode(std::vector<std::pair<double, Weight>> t) : t_(std::move(t)) {}
    double value(const Point& x) const override {
        double v = 0.0;
        for (const auto& [c, w] : t_) v += c * w(x);
        return v;
    }
    int dim() const override { return t_.front().second.dim(); }
    void singular_candidates(std::vector<Point>& out) const override {
        for (const auto& t : t_) t.second.node().singular_candidates(out);
    }
    RadialInfo radial() const override {
        RadialInfo r{true, true, {}};
        for (const auto& t : t_) r = merge_radial(r, t.second.node().radial(), dim());
        return r;
    }
    void spheres(std::vector<Sphere>& out) const override {
        for (const auto& t : t_) t.second.node().spheres(out);
    }
    std::string describe() const override {
        std::string s = "sum(";
        for (std::size_t i = 0; i < t_.size(); ++i) {
            s += (i ? "," : "") + format_double(t_[i].first) + "*" + t_[i].second.spec_string();
        }
        return s + ")";
    }

private:
    std::vector<std::pair<double, Weight>> t_;
};

class TruncatedNode final : public WeightNode {
public:
    TruncatedNode(Weight base, double lo, double hi) : base_(std::move(base)), lo_(lo), hi_(hi) {}
    double value(const Point& x) const override {
        const double v = base_(x);
        if (std::isnan(v)) return v;
        return std::min(hi_, std::max(lo_, v));
    }
    int dim() const override { return base_.dim(); }
    void singular_candidates(std::vector<Point>& out) const override { base_.node().singular_candidates(out); }
    RadialInfo radial() const override { return base_.node().radial(); }
    void spheres(std::vector<Sphere>& out) const override {
        base_.node().spheres(out);
        const RadialInfo r = base_.node().radial();
        if (!r.radial || r.any) return;
        for (double level : {lo_, hi_}) {
            if (!(level > 0.0) || !std::isfinite(level)) continue;
            if (auto rad = base_.node().level_radius(level); rad && std::isfinite(*rad) && *rad > 0.0) {
                out.push_back({r.center, *rad});
            }
        }
    }
    std::string describe() const override {
        std::string s = "truncate(" + base_.spec_string();
        if (lo_ > 0.0) s += ",lower=" + format_double(lo_);
        if (std::isfinite(hi_)) s += ",upper=" + format_double(hi_);
        return s + ")";
    }

private:
    Weight base_;
    double lo_;
    double hi_;
};

class PowerOfNode final : public WeightNode {
public:
    PowerOfNode(Weight base, double e) : base_(std::move(base)), e_(e) {}
    double value(const Point& x) const override { return std::pow(base_(x), e_); }
    int dim() const override { return base_.dim(); }
    void singular_candidates(std::vector<Point>& out) const override { base_.node().singular_candidates(out); }
    RadialInfo radial() const override { return base_.node().radial(); }
    void spheres(std::vector<Sphere>& out) const override { base_.node().spheres(out); }
    std::optional<double> level_radius(double level) const override {
        if (!(level > 0.0) || e_ == 0.0) return std::nullopt;
        return base_.node().level_radius(std::pow(level, 1.0 / e_));
    }
    std::string describe() const override {
        return "pow(" + base_.spec_string() + ",e=" + format_double(e_) + ")";
    }

private:
    Weight base_;
    double e_;
};

class MollifiedNode final : public WeightNode {
public:
    MollifiedNode(Weight base, double eps, double rel_tol)
        : base_(std::move(base)), eps_(eps), rel_tol_(rel_tol), n_(base_.dim()), cn_(mollifier_constant(n_)) {
        const RadialInfo r = base_.node().radial();
        radial_ = r.radial;
        center_ = r.any ? Point{0.0, 0.0, 0.0} : r.center;
    }

    double value(const Point& x) const override {
        if (!radial_) return memo_direct(x);
        const double s = distance(x, center_, n_);
        const long k = cell_of(s);
        double xs[4];
        double ys[4];
        for (int j = 0; j < 4; ++j) {
            const long node = k - 1 + j;
            if (node < 0) {
                xs[j] = -node_radius(1);
                ys[j] = table_value(1);
            } else {
                xs[j] = node_radius(node);
                ys[j] = table_value(node);
            }
        }
        double v = 0.0;
        for (int j = 0; j < 4; ++j) {
            double l = 1.0;
            for (int m = 0; m < 4; ++m) {
                if (m != j) l *= (s - xs[m]) / (xs[j] - xs[m]);
            }
            v += l * ys[j];
        }
        return v;
    }
    int dim() const override { return n_; }
    void singular_candidates(std::vector<Point>&) const override {}
    RadialInfo radial() const override {
        const RadialInfo r = base_.node().radial();
        return r;
    }
    std::string describe() const override {
        return "mollify(" + base_.spec_string() + ",eps=" + format_double(eps_) + ")";
    }

    /// Convolution by direct ball quadrature at x.
    double direct(const Point& x) const {
        IntegrandHints hints;
        for (const auto& p : base_.singular_points()) {
            if (distance(p, x, n_) <= eps_ * (1.0 + 1e-12)) hints.singular_points.push_back(p);
        }
        hints.spheres = base_.feature_spheres();
        if (radial_ && distance(x, center_, n_) == 0.0) hints.radial_center = x;
        const double inv = 1.0 / eps_;
        const double scale = std::pow(inv, n_) * cn_;
        Integrand f = [&](const Point& z) {
            double s2 = 0.0;
            for (int i = 0; i < n_; ++i) {
                const double d = (x[i] - z[i]) * inv;
                s2 += d * d;
            }
            if (s2 >= 1.0) return 0.0;
            return base_(z) * scale * std::exp(-1.0 / (1.0 - s2));
        };
        QuadratureSpec spec;
        spec.rel_tol = rel_tol_;
        spec.max_depth = 40;
        return integrate_ball(f, Ball{x, eps_}, n_, hints, spec).value;
    }

private:
    static constexpr long kInner = 64;
    static constexpr double kGrowth = 1.0 + 1.0 / 64.0;

    double node_radius(long k) const {
        if (k <= kInner) return eps_ * static_cast<double>(k) / kInner;
        return eps_ * std::pow(kGrowth, static_cast<double>(k - kInner));
    }
    long cell_of(double s) const {
        if (s < eps_) return static_cast<long>(std::floor(s * kInner / eps_));
        return kInner + static_cast<long>(std::floor(std::log(s / eps_) / std::log(kGrowth)));
    }
    double table_value(long k) const {
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (auto it = table_.find(k); it != table_.end()) return it->second;
        }
        Point x = center_;
        x[0] += node_radius(k);
        const double v = direct(x);
        std::lock_guard<std::mutex> lock(mu_);
        table_.emplace(k, v);
        return v;
    }
    double memo_direct(const Point& x) const {
        {
            std::lock_guard<std::mutex> lock(mu_);
            if (auto it = memo_.find(x); it != memo_.end()) return it->second;
        }
        const double v = direct(x);
        std::lock_guard<std::mutex> lock(mu_);
        memo_.emplace(x, v);
        return v;
    }

    Weight base_;
    double eps_;
    double rel_tol_;
    int n_;
    double cn_;
    bool radial_ = false;
    Point center_{0.0, 0.0, 0.0};
    mutable std::mutex mu_;
    mutable std::unordered_map<long, double> table_;
    mutable std::map<Point, double> memo_;
};

}  // namespace

Weight::Weight(std::shared_ptr<const WeightNode> node, std::optional<ApClaim> claim)
    : node_(std::move(node)), n_(node_->dim()), claim_(claim) {
    std::vector<Point> cand;
    node_->singular_candidates(cand);
    for (const auto& p : cand) {
        const double v = node_->value(p);
        if (!std::isfinite(v) || v == 0.0) {
            const bool dup = std::any_of(singular_.begin(), singular_.end(),
                                         [&](const Point& q) { return distance(p, q, n_) == 0.0; });
            if (!dup) singular_.push_back(p);
        }
    }
}

Weight Weight::constant(double c, int n) {
    check_dim(n);
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("constant weight must be positive and finite");
    return Weight(std::make_shared<ConstantNode>(c, n));
}

Weight Weight::power(double alpha, const Point& center, int n, bool claim_a1n) {
    check_dim(n);
    if (!std::isfinite(alpha)) throw DomainError("power exponent must be finite");
    std::optional<ApClaim> claim;
    if (claim_a1n) {
        if (!(alpha > -n && alpha < 1.0)) {
            throw DomainError("alpha=" + format_double(alpha) + " out of admissible range (-n,1) when claiming A_{1+1/n}");
        }
        // Origin-ball value (n/(n+a)) (n/(n-na))^{1/n}.
        const double nn = n;
        claim = ApClaim{1.0 + 1.0 / nn, nn / (nn + alpha) * std::pow(nn / (nn - nn * alpha), 1.0 / nn)};
    }
    return Weight(std::make_shared<PowerNode>(alpha, center, n), claim);
}

Weight Weight::logtype(const Point& center, int n) {
    check_dim(n);
    return Weight(std::make_shared<LogNode>(center, n));
}

Weight Weight::product(const std::vector<Weight>& factors) {
    if (factors.empty()) throw DomainError("product needs at least one factor");
    for (const auto& f : factors) {
        if (f.dim() != factors.front().dim()) throw DomainError("product factors differ in dimension");
    }
    return Weight(std::make_shared<ProductNode>(factors));
}

Weight Weight::weighted_sum(const std::vector<std::pair<double, Weight>>& terms) {
    if (terms.empty()) throw DomainError("sum needs at least one term");
    for (const auto& [c, w] : terms) {
        if (!(c > 0.0)) throw DomainError("sum coefficients must be positive");
        if (w.dim() != terms.front().second.dim()) throw DomainError("sum terms differ in dimension");
    }
    return Weight(std::make_shared<SumNode>(terms));
}

Weight Weight::power_of(const Weight& base, double exponent) {
    if (!std::isfinite(exponent)) throw DomainError("exponent must be finite");
    return Weight(std::make_shared<PowerOfNode>(base, exponent));
}

double Weight::operator()(const Point& x) const { return node_->value(x); }

WeightValue Weight::eval(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n_) {
        throw DomainError("dimension mismatch: weight is " + std::to_string(n_) + "-dimensional, point has " +
                          std::to_string(x.size()) + " coordinates");
    }
    const Point p = make_point(x);
    const double v = node_->value(p);
    if (std::isnan(v)) return WeightValue::singular(SingularKind::undefined);
    if (std::isinf(v)) return WeightValue::singular(SingularKind::blowUp);
    for (const auto& s : singular_) {
        if (distance(s, p, n_) == 0.0) {
            return WeightValue::singular(v == 0.0 ? SingularKind::vanish : SingularKind::undefined);
        }
    }
    return WeightValue::regular(v);
}

Weight Weight::with_claim(const ApClaim& claim) const { return Weight(node_, claim); }

std::optional<Point> Weight::radial_center() const {
    const RadialInfo r = node_->radial();
    if (!r.radial || r.any) return std::nullopt;
    return r.center;
}

bool Weight::radial_any() const {
    const RadialInfo r = node_->radial();
    return r.radial && r.any;
}

std::vector<Sphere> Weight::feature_spheres() const {
    std::vector<Sphere> out;
    node_->spheres(out);
    return out;
}

IntegrandHints Weight::hints() const {
    IntegrandHints h;
    h.singular_points = singular_;
    h.spheres = feature_spheres();
    const RadialInfo r = node_->radial();
    if (r.radial && !r.any) h.radial_center = r.center;
    return h;
}

std::string Weight::spec_string() const { return node_->describe(); }

WeightValue eval_weight(const Weight& w, std::span<const double> x) { return w.eval(x); }

Weight truncate(const Weight& w, const TruncationMode& mode) {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    switch (mode.kind) {
        case TruncationMode::Kind::upper:
            if (!(mode.upper > 0.0)) throw DomainError("truncation level must be positive");
            hi = mode.upper;
            break;
        case TruncationMode::Kind::lower:
            if (!(mode.lower > 0.0)) throw DomainError("truncation level must be positive");
            lo = mode.lower;
            break;
        case TruncationMode::Kind::band:
            if (!(mode.lower > 0.0) || !(mode.upper > 0.0)) throw DomainError("truncation level must be positive");
            if (!(mode.lower < mode.upper)) throw DomainError("band truncation needs s < tau");
            lo = mode.lower;
            hi = mode.upper;
            break;
    }
    return Weight(std::make_shared<TruncatedNode>(w, lo, hi));
}

Weight mollify(const Weight& w, double eps, double rel_tol) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("mollification radius must be positive");
    return Weight(std::make_shared<MollifiedNode>(w, eps, rel_tol));
}

double mollifier_constant(int n) {
    check_dim(n);
    static const std::array<double, 3> cache = [] {
        std::array<double, 3> out{};
        for (int d = 1; d <= 3; ++d) {
            auto g = [d](double s) {
                if (s >= 1.0) return 0.0;
                return std::pow(s, d - 1) * std::exp(-1.0 / (1.0 - s * s));
            };
            const double br[] = {0.0, 0.5, 0.9, 1.0};
            const double radial = adaptive_gk15(g, br, 1e-14, 0.0, 40).value;
            out[d - 1] = 1.0 / (d * unit_ball_volume(d) * radial);
        }
        return out;
    }();
    return cache[n - 1];
}

double mollifier(const Point& x, int n) {
    const double s2 = dot(x, x, n);
    if (s2 >= 1.0) return 0.0;
    return mollifier_constant(n) * std::exp(-1.0 / (1.0 - s2));
}

}  // namespace wrlab

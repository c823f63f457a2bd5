#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wrlab/quadrature.hpp"
#include "wrlab/report.hpp"
#include "wrlab/weights.hpp"

namespace wrlab {

/// Finite family of balls that discretizes a supremum over all balls.
struct BallFamily {
    int n = 2;
    std::vector<Ball> balls;
    Ball domain;
    double spacing = 0.0;
    double r_min = 0.0;
    double ratio = 2.0;

    /// Centres on domain.center + spacing * Z^n, radii r_min * ratio^j, every
    /// ball contained in the domain.
    static BallFamily lattice(int n, const Ball& domain, double spacing, double r_min, double ratio = 2.0);
    /// Uniformly random balls inside the domain with radius in [r_min, domain.radius / 2].
    static BallFamily random(int n, const Ball& domain, std::size_t count, std::uint64_t seed, double r_min);

    /// Lattice refinement: spacing / sqrt(2)^level and ratio^(1/2^level).
    BallFamily refined(int level) const;
    /// Balls of this family contained in omega.
    BallFamily restricted_to(const Ball& omega) const;
    Json describe() const;
};

struct SeminormEstimate {
    double value = 0.0;
    BallFamily family;
    double rel_tol = 1e-6;
    bool is_lower_bound = true;
    std::vector<double> per_ball;
    std::size_t argmax = 0;
};

bool ball_contains(const Ball& outer, const Ball& inner, int n);

/// Integral of w^power over B.
double ball_integral(const Weight& w, const Ball& B, double power, const QuadratureSpec& spec = {});
/// (w^power)_B.
double ball_average(const Weight& w, const Ball& B, double power, const QuadratureSpec& spec = {});
/// w(B).
double weight_measure(const Weight& w, const Ball& B, const QuadratureSpec& spec = {});

/// (w)_B ((w^{-1/(p-1)})_B)^{p-1}.
double ap_ball_quantity(const Weight& w, const Ball& B, double p, const QuadratureSpec& spec = {});
/// ((1/w(B)) int_B |w - (w)_B|^q w^{1-q})^{1/q}.
double bmo_ball_quantity(const Weight& w, const Ball& B, double q, const QuadratureSpec& spec = {});

SeminormEstimate ap_characteristic(const Weight& w, double p, const BallFamily& F, const QuadratureSpec& spec = {});
SeminormEstimate bmo_weighted(const Weight& w, const Ball& omega, const BallFamily& F, const QuadratureSpec& spec = {});
SeminormEstimate bmo_q(const Weight& w, double q, const Ball& omega, const BallFamily& F,
                       const QuadratureSpec& spec = {});

Report verify_truncation_bounds(const Weight& w, double p, const std::vector<TruncationMode>& levels,
                                const BallFamily& F, const QuadratureSpec& spec = {}, double tol = 0.02);

/// a_ref overrides the reference characteristic of w; otherwise the larger of
/// the claimed bound and the family estimate is used.
Report verify_mollification_bounds(const Weight& w, double p, const std::vector<double>& eps_list, double R0,
                                   const BallFamily& F, const QuadratureSpec& spec = {}, double tol = 0.02,
                                   std::optional<double> a_ref = std::nullopt);

struct BmoStabilityLevels {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::pair<double, double>> band;
};

Report verify_bmo_truncation_stability(const Weight& w, double R0, const BmoStabilityLevels& levels,
                                       const BallFamily& F, const QuadratureSpec& spec = {}, double tol = 0.02,
                                       double band_tol = 0.20);

/// Rows `ball_center, radius, value` with centre coordinates space separated.
void write_ball_csv(const std::string& path, const SeminormEstimate& est);

}  // namespace wrlab

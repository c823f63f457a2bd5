#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wrlab/config.hpp"
#include "wrlab/geometry.hpp"
#include "wrlab/pde.hpp"
#include "wrlab/report.hpp"

namespace wrlab {

/// Settings shared by the empirical studies. Each experiment has its own
/// defaults (see defaults()); unused fields are ignored.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    int n = 2;
    std::vector<double> grids;            ///< spatial steps, coarse to fine
    std::vector<std::string> weights;     ///< weight grammar strings
    std::string field = "dominant";       ///< "dominant" or "identity"
    double r = 1.0;
    double p = 0.1;
    int samples = 40;
    int blocks = 8;                       ///< forcing cells per spatial axis
    int time_blocks = 8;
    std::vector<double> caps;             ///< truncation sweep levels
    std::vector<double> alphas;           ///< truncation sweep exponents
    std::vector<double> radii;            ///< radius ratios or ball radii
    std::vector<double> q_grid;
    double K = 32.0;
    double gamma0 = 0.0;                  ///< 0: fit from a sojourn family
    std::vector<double> scales{0.1, 7.3};
    double tau_factor = 1.0;              ///< time step tau = tau_factor h^2

    static ExperimentConfig defaults(const std::string& experiment);
    /// Defaults overridden by `key = value` entries (weights split on ';').
    static ExperimentConfig from_config(const std::string& experiment, const Config& cfg);
    Config to_config() const;
    Json describe() const;
};

const std::vector<std::string>& experiment_names();

struct ExperimentResult {
    Report report;
    std::vector<std::string> header;
    std::vector<std::vector<double>> series;
};

/// report.json (stable field order) and series.csv in `dir`, created if needed.
void write_experiment(const std::string& dir, const ExperimentResult& result);

ExperimentResult sojourn_experiment(const ExperimentConfig& cfg);
ExperimentResult lin_ratio_experiment(const ExperimentConfig& cfg);
ExperimentResult weak_harnack_experiment(const ExperimentConfig& cfg);
ExperimentResult propup_experiment(const ExperimentConfig& cfg);
ExperimentResult iq_envelope(const ExperimentConfig& cfg);
ExperimentResult logweight_bmo_decay(const ExperimentConfig& cfg);
/// Fitted N0 over a refinement ladder plus a brute-force audit of the upper
/// contact sets on small grids.
ExperimentResult abp_experiment(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Seeded slant tube inside B_r(0): rho in [0.2 r, 0.35 r), endpoints uniform in
/// B_{r - rho}, duration log-uniform in the K-slant window (w-averages over B_r).
SlantCylinder random_slant(const Weight& w, double r, double K, std::uint64_t seed);

/// Spearman rank correlation with average ranks for ties.
double rank_correlation(const std::vector<double>& x, const std::vector<double>& y);

/// Least squares fit of log y = log c + gamma log x over the pairs with
/// x in [x_lo, x_hi] and y > 0. Returns {gamma, c}; NaN when fewer than two
/// distinct x values qualify.
std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y, double x_lo,
                                     double x_hi);

/// Ratio (1/phi(B)) int_B |phi - (phi)_B| of the log weight on an origin ball,
/// in closed form: 2 / (e (n |ln r| + 1)) for r <= 1/e.
double log_weight_origin_ratio(int n, double r);

}  // namespace wrlab

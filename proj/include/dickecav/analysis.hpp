// analysis.hpp: fits of measured correlation, lifetime and power-sweep data
//
// Background convention used throughout: an uncorrelated background carrying a
// fraction (1 - p) of the detected rate gives g2_meas - 1 = p^2 (g2_true - 1).

#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dickecav/correlations.hpp"

namespace dickecav::analysis {

// g2(tau) = 1 - (a + b) e^{-|tau|/tau1} + b e^{-|tau|/tau2} + c e^{-tau^2 / (2 tau3^2)},
// convolved with a Gaussian instrument response of FWHM irf_fwhm. tau3 is the
// standard deviation of the intrinsic collective peak (FWHM = 2.3548 tau3).
struct G2FitModel {
    double a = 0.0;
    double b = 0.0;
    double tau1 = 5.0;      // ns
    double tau2 = 50.0;     // ns
    double c = 0.0;
    double tau3 = 0.1;      // ns
    double irf_fwhm = 0.4;  // ns

    // Throws InvalidArgument unless the times are positive and the amplitudes non-negative.
    void validate() const;
};

// Model without the instrument response.
double g2_intrinsic(const G2FitModel& m, double tau);
// Model convolved with the instrument response; irf_fwhm = 0 returns g2_intrinsic.
double g2_measured(const G2FitModel& m, double tau);

// e^{x^2} erfc(x), finite for all x > -26.
double erfcx(double x);

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> sigma;  // one-sigma; +inf along unidentifiable directions
    Eigen::MatrixXd covariance;
    double residual_rms = 0.0;  // weighted residual rms
    double reduced_chi2 = 0.0;
    int evaluations = 0;
    std::string status;         // least-squares termination reason
    bool ill_conditioned = false;
    double condition_number = 0.0;

    double value(const std::string& name) const;
    double error(const std::string& name) const;
};

struct G2FitOptions {
    // A peak narrower than the IRF fixes only c tau3 / sqrt(tau3^2 + s_irf^2), so by default
    // tau3 and the IRF width stay at their initial values.
    bool fit_tau3 = false;
    bool fit_irf = false;
    // Coincidences per bin at g2 = 1. When positive the fit maximizes the Poisson likelihood of the
    // counts and reports unscaled uncertainties; otherwise it is unweighted with errors scaled by
    // the residual variance.
    double plateau_counts = 0.0;
    // Scales the model by a fitted factor, absorbing the error of a plateau estimated where
    // slow bunching has not fully decayed.
    bool fit_normalization = true;
    int max_evaluations = 4000;
};

struct G2FitResult {
    FitResult fit;
    G2FitModel model;         // fitted; amplitudes are unconstrained and may dip below zero within noise
    double normalization = 1.0; // fitted scale of the trace, 1 when held
    double purity = 1.0;
    double a_corrected = 0.0; // a / p^2
    double b_corrected = 0.0;
    double c_corrected = 0.0;
    double measured_peak = 0.0;     // fitted model with IRF at tau = 0
    double deconvolved_peak = 0.0;  // fitted model without IRF at tau = 0
    double intrinsic_peak = 0.0;    // 1 + (deconvolved_peak - 1) / p^2
};

// `trace` must be normalized to its long-delay plateau; `initial` seeds the fit and
// supplies the held parameters. Throws ConvergenceError when the fit fails.
G2FitResult fit_g2(const correlations::CorrelationTrace& trace, const G2FitModel& initial, double purity,
                   const G2FitOptions& opts = {});

struct NormalizedHistogram {
    correlations::CorrelationTrace trace;
    double plateau = 0.0; // mean coincidences per bin over the last 20% of the delay range
};

// Raw coincidences -> g2. Throws InvalidArgument on a zero plateau or malformed input.
NormalizedHistogram normalize_histogram(std::span<const double> tau_ns, std::span<const double> coincidences);

struct EmitterNumber {
    double n;
    double sigma;
    bool valid; // false when a > p^2, i.e. fewer than one emitter
};

// N = p^2 / a with first-order error propagation.
EmitterNumber estimate_emitter_number(double a, double purity, double sigma_a = 0.0, double sigma_p = 0.0);

// 2 (1 - 1/N) for N independent identical emitters.
double thermal_bunching_limit(double n);

struct LifetimeRecord {
    double intensity;
    double tau1;        // ns
    double sigma = 0.0; // ns; zero means unweighted
};

struct SaturationFit {
    double tau0;       // ns, zero-intensity lifetime
    double sigma;      // saturation parameter, 1/(ns intensity)
    double tau0_error;
    double sigma_error;
    FitResult fit;
};

// tau1(I) = tau0 / (1 + sigma I tau0). Needs at least three distinct intensities.
SaturationFit fit_saturation_lifetime(std::span<const LifetimeRecord> records);

struct PurcellFactor {
    double effective; // tau0 / tauc - 1
    double ideal;     // effective / xi
};

PurcellFactor purcell_factor(double tau0, double tauc, double debye_waller);

enum class Channel { zpl, psb };

std::string to_string(Channel c);
Channel channel_from_string(const std::string& s); // "ZPL" / "PSB", case-insensitive

struct PowerSweepRecord {
    double power; // uW
    double rate;  // counts/s
    Channel channel;
};

struct PowerLawOptions {
    double power_min = 0.0;
    double power_max = std::numeric_limits<double>::infinity();
    // Counting time per point in s. When positive the fit weights ln I by the Poisson
    // counts and reports unscaled uncertainties.
    double integration_time = 0.0;
};

struct PowerLawFit {
    double exponent;
    double exponent_error;
    double log_prefactor; // ln c in I = c P^k
    int points;
    Channel channel;
};

// Log-log linear regression over the records inside [power_min, power_max].
PowerLawFit fit_power_law(std::span<const PowerSweepRecord> records, const PowerLawOptions& opts = {});

} // namespace dickecav::analysis

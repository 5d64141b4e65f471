// correlations.hpp: g2(tau) by quantum regression and feature extraction

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dickecav/dicke.hpp"
#include "dickecav/oracle.hpp"

namespace dickecav::correlations {

enum class TraceSource { dicke_model, oracle, measurement };

std::string to_string(TraceSource s);

struct CorrelationTrace {
    std::vector<double> tau;    // ns, strictly increasing
    std::vector<double> values; // g2
    double normalization = 1.0; // steady-state rate entering the denominator
    TraceSource source = TraceSource::measurement;

    // Throws InvalidArgument unless sizes match, tau increases strictly, every value
    // is finite and >= -tol, and (model traces only) tau[0] >= 0.
    void validate(double tol = 1e-9) const;
};

// 0 followed by `per_decade` log-spaced points per decade from lo to hi.
std::vector<double> default_tau_grid(double lo_ns = 0.01, double hi_ns = 100.0, int per_decade = 40);

// g2(tau) = tr{J+J- V(tau)} / <J+J->^2 with V(0) = J- rho_ss J+. Throws ZeroRate
// when <J+J-> vanishes.
CorrelationTrace g2_dicke(const dicke::DickeLiouvillian& L, const dicke::DickeBlockState& rho_ss,
                          std::span<const double> tau_grid, const ode::Options& opts = {});

// Convenience: steady state of L followed by g2_dicke.
CorrelationTrace g2_dicke(const dicke::DickeLiouvillian& L, std::span<const double> tau_grid,
                          const ode::Options& opts = {});

// Cavity-inclusive g2 with V(0) = a rho_ss a+ and observable a+a.
CorrelationTrace g2_oracle(const oracle::FockLindbladSystem& system, std::span<const double> tau_grid,
                           const ode::Options& opts = {});

struct FeatureOptions {
    double presence_threshold = 1e-4; // minimal |extremum - asymptote| for a feature to count
    double coverage_factor = 5.0;     // tau range must exceed this multiple of every time constant
    double settle_fraction = 0.05;    // last value must lie this close to the asymptote, relative to the feature size
};

struct G2Features {
    double asymptote = 1.0;            // mean over the final decade
    std::optional<double> peak_value;  // g2 at the zero-delay maximum
    std::optional<double> peak_tau;
    std::optional<double> decay_time;  // 1/e time of the peak relative to the asymptote
    std::optional<double> dip_value;   // minimum of g2
    std::optional<double> dip_tau;
    std::optional<double> rise_time;   // exponential recovery time constant of the dip
};

// Throws InvalidArgument when the trace is shorter than coverage_factor times a
// detected time constant or its tail has not settled onto the asymptote.
G2Features extract_features(const CorrelationTrace& trace, const FeatureOptions& opts = {});

} // namespace dickecav::correlations

#include "dickecav/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dickecav/error.hpp"

namespace dickecav::correlations {

std::string to_string(TraceSource s) {
    switch (s) {
    case TraceSource::dicke_model: return "dicke-model";
    case TraceSource::oracle: return "oracle";
    case TraceSource::measurement: return "measurement";
    }
    return "unknown";
}

void CorrelationTrace::validate(double tol) const {
    if (tau.size() != values.size()) throw InvalidArgument("trace: tau and values differ in length");
    if (tau.empty()) throw InvalidArgument("trace is empty");
    // Measured histograms cover both delay signs; model traces start at zero.
    if (source != TraceSource::measurement && !(tau.front() >= 0.0))
        throw InvalidArgument("model trace must start at tau >= 0");
    for (std::size_t i = 1; i < tau.size(); ++i)
        if (!(tau[i] > tau[i - 1])) throw InvalidArgument("trace tau grid must increase strictly");
    for (double v : values)
        if (!std::isfinite(v) || v < -tol) throw InvalidArgument("trace values must be finite and >= 0");
}

std::vector<double> default_tau_grid(double lo_ns, double hi_ns, int per_decade) {
    if (!(lo_ns > 0.0) || !(hi_ns > lo_ns) || per_decade < 1) throw InvalidArgument("invalid tau grid specification");
    std::vector<double> grid{0.0};
    const double decades = std::log10(hi_ns / lo_ns);
    const int n = static_cast<int>(std::ceil(decades * per_decade - 1e-9));
    for (int i = 0; i <= n; ++i) grid.push_back(lo_ns * std::pow(10.0, decades * i / n));
    return grid;
}

namespace {

// Regression runs from tau = 0; a grid starting later gets 0 prepended and dropped again.
std::vector<double> with_origin(std::span<const double> tau_grid, bool& prepended) {
    if (tau_grid.empty()) throw InvalidArgument("empty tau grid");
    if (tau_grid.front() < 0.0) throw InvalidArgument("tau grid must be >= 0 (g2 is even in tau)");
    std::vector<double> g(tau_grid.begin(), tau_grid.end());
    prepended = g.front() > 0.0;
    if (prepended) g.insert(g.begin(), 0.0);
    return g;
}

} // namespace

CorrelationTrace g2_dicke(const dicke::DickeLiouvillian& L, const dicke::DickeBlockState& rho_ss,
                          std::span<const double> tau_grid, const ode::Options& opts) {
    const double rate = rho_ss.jplus_jminus();
    if (!(rate > 1e-300)) throw ZeroRate("steady state does not radiate: <J+J-> = 0");
    bool prepended = false;
    const auto grid = with_origin(tau_grid, prepended);

    CorrelationTrace trace;
    trace.normalization = rate;
    trace.source = TraceSource::dicke_model;
    const auto traj = dicke::evolve(L, rho_ss.lowered(), grid, opts);
    for (std::size_t i = prepended ? 1 : 0; i < grid.size(); ++i) {
        trace.tau.push_back(grid[i]);
        trace.values.push_back(traj[i].jplus_jminus() / (rate * rate));
    }
    return trace;
}

CorrelationTrace g2_dicke(const dicke::DickeLiouvillian& L, std::span<const double> tau_grid,
                          const ode::Options& opts) {
    return g2_dicke(L, dicke::steady_state(L), tau_grid, opts);
}

CorrelationTrace g2_oracle(const oracle::FockLindbladSystem& system, std::span<const double> tau_grid,
                           const ode::Options& opts) {
    if (!system.include_cavity()) throw InvalidArgument("cavity g2 needs the cavity mode");
    const auto ss = oracle::oracle_steady_state_ex(system);
    const oracle::SparseC a = ss.system.annihilation();
    const oracle::SparseC n_op = oracle::SparseC(a.adjoint()) * a;
    const double photons = oracle::expectation(ss.state, n_op).real();
    if (!(photons > 1e-300)) throw ZeroRate("cavity is empty in the steady state");
    bool prepended = false;
    const auto grid = with_origin(tau_grid, prepended);

    CorrelationTrace trace;
    trace.normalization = photons;
    trace.source = TraceSource::oracle;
    const auto num = oracle::regression(ss.system, ss.state, a, n_op, grid, opts);
    for (std::size_t i = prepended ? 1 : 0; i < grid.size(); ++i) {
        trace.tau.push_back(grid[i]);
        trace.values.push_back(num[i].real() / (photons * photons));
    }
    return trace;
}

namespace {

// Crossing of `target` by a deviation that relaxes exponentially between the
// bracketing samples (i-1, i); falls back to linear interpolation when the
// deviations change sign.
double crossing(const CorrelationTrace& t, std::size_t i, double asymptote, double target) {
    const double x0 = t.tau[i - 1], x1 = t.tau[i];
    const double d0 = t.values[i - 1] - asymptote, d1 = t.values[i] - asymptote, dt = target - asymptote;
    if (d0 * d1 > 0.0 && d0 * dt > 0.0) {
        const double l0 = std::log(std::abs(d0)), l1 = std::log(std::abs(d1)), lt = std::log(std::abs(dt));
        if (l1 != l0) return x0 + (x1 - x0) * (lt - l0) / (l1 - l0);
    }
    if (d1 == d0) return x1;
    return x0 + (x1 - x0) * (dt - d0) / (d1 - d0);
}

} // namespace

G2Features extract_features(const CorrelationTrace& trace, const FeatureOptions& opts) {
    trace.validate(1e-6);
    if (trace.tau.size() < 3) throw InvalidArgument("trace too short for feature extraction");
    const double tmax = trace.tau.back();
    if (!(tmax > 0.0)) throw InvalidArgument("trace spans no delay");

    G2Features f;
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < trace.tau.size(); ++i)
        if (trace.tau[i] >= 0.1 * tmax) {
            sum += trace.values[i];
            ++count;
        }
    f.asymptote = sum / count;
    const double A = f.asymptote;
    const double inv_e = std::exp(-1.0);

    const auto imax = static_cast<std::size_t>(std::max_element(trace.values.begin(), trace.values.end()) - trace.values.begin());
    if (trace.values[imax] - A > opts.presence_threshold) {
        f.peak_value = trace.values[imax];
        f.peak_tau = trace.tau[imax];
        const double target = A + (trace.values[imax] - A) * inv_e;
        for (std::size_t i = imax + 1; i < trace.tau.size(); ++i)
            if (trace.values[i] <= target) {
                f.decay_time = crossing(trace, i, A, target) - trace.tau[imax];
                break;
            }
    }

    const auto imin = static_cast<std::size_t>(std::min_element(trace.values.begin(), trace.values.end()) - trace.values.begin());
    if (A - trace.values[imin] > opts.presence_threshold) {
        f.dip_value = trace.values[imin];
        f.dip_tau = trace.tau[imin];
        // Exponential recovery A - g = D exp(-(tau - tau_dip)/t_r), fitted in log space
        // over the part of the recovery between 90% and e^-2 of the dip depth. The
        // bottom of a broad dip is excluded because its position is ill-defined.
        const double depth = A - trace.values[imin];
        double st = 0, sy = 0, stt = 0, sty = 0;
        int m = 0;
        for (std::size_t i = imin + 1; i < trace.tau.size(); ++i) {
            const double deficit = A - trace.values[i];
            if (deficit < std::exp(-2.0) * depth) break;
            if (deficit > 0.9 * depth) continue;
            const double y = std::log(deficit / depth);
            st += trace.tau[i];
            sy += y;
            stt += trace.tau[i] * trace.tau[i];
            sty += trace.tau[i] * y;
            ++m;
        }
        const double denom = m * stt - st * st;
        if (m >= 3 && denom > 0.0 && (m * sty - st * sy) < 0.0) {
            f.rise_time = -denom / (m * sty - st * sy);
        } else {
            const double target = A - depth * inv_e;
            for (std::size_t i = imin + 1; i < trace.tau.size(); ++i)
                if (trace.values[i] >= target) {
                    f.rise_time = crossing(trace, i, A, target) - trace.tau[imin];
                    break;
                }
        }
    }

    // An unsettled tail biases the asymptote and therefore every feature.
    const double amplitude = std::max({f.peak_value.value_or(A) - A, A - f.dip_value.value_or(A), opts.presence_threshold});
    if (std::abs(trace.values.back() - A) > opts.settle_fraction * amplitude)
        throw InvalidArgument("trace has not settled: last value " + std::to_string(trace.values.back()) +
                              " vs asymptote " + std::to_string(A));

    const double longest = std::max(f.decay_time.value_or(0.0), f.rise_time.value_or(0.0));
    if (tmax < opts.coverage_factor * longest)
        throw InvalidArgument("trace covers " + std::to_string(tmax) + " ns, less than " +
                              std::to_string(opts.coverage_factor) + " x the time constant " + std::to_string(longest));
    return f;
}

} // namespace dickecav::correlations

#include "dickecav/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "dickecav/dicke.hpp"
#include "dickecav/error.hpp"
#include "dickecav/ode.hpp"
#include "dickecav/parallel.hpp"

namespace dickecav::meanfield {

using cplx = std::complex<double>;

std::complex<double> emitter_frequency(const SubEnsemble& e, ComplexFrequency convention) {
    const auto& r = e.rates;
    switch (convention) {
    case ComplexFrequency::half_width: return {e.omega, -(0.5 * (r.gamma + r.eta) + r.chi)};
    case ComplexFrequency::literal: return {e.omega + r.chi, -(r.gamma + r.eta)};
    }
    throw InvalidArgument("unknown complex-frequency convention");
}

bool CumulantState::is_physical(double tol) const {
    if (!(photon_number >= -tol) || !std::isfinite(photon_number)) return false;
    for (double s : sigma_z)
        if (!(std::abs(s) <= 1.0 + tol)) return false;
    // Distinct emitters: Hermitian, real within a sub-ensemble, and bounded by
    // Cauchy-Schwarz |<s+_i s-_j>| <= sqrt(p_i p_j) with p = (1 + s_z)/2. Negative
    // values are allowed (subradiant correlations below inversion).
    for (Eigen::Index i = 0; i < pair.rows(); ++i) {
        const double pi = 0.5 * (1.0 + sigma_z[i]);
        if (std::abs(pair(i, i).imag()) > tol) return false;
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double pj = 0.5 * (1.0 + sigma_z[j]);
            if (std::abs(pair(i, j) - std::conj(pair(j, i))) > tol) return false;
            if (std::abs(pair(i, j)) > std::sqrt(std::max(pi * pj, 0.0)) + tol) return false;
        }
    }
    return true;
}

namespace {

// Precomputed coefficients of the closure for one ensemble.
struct Closure {
    int K;
    Eigen::ArrayXd N, g, gamma, eta;
    Eigen::ArrayXcd w;   // emitter complex frequencies
    Eigen::ArrayXcd den; // conj(w_k) - w_c
    double kappa;

    Closure(const EmitterEnsembleSpec& spec, ComplexFrequency convention) {
        K = static_cast<int>(spec.sub_ensembles.size());
        N.resize(K), g.resize(K), gamma.resize(K), eta.resize(K), w.resize(K), den.resize(K);
        kappa = spec.cavity.kappa;
        const cplx wc(spec.cavity.omega_c, -0.5 * kappa);
        for (int k = 0; k < K; ++k) {
            const auto& e = spec.sub_ensembles[k];
            if (!(e.g >= 0.0)) throw InvalidArgument("mean-field solver needs g_k >= 0");
            N[k] = e.count;
            g[k] = e.g;
            gamma[k] = e.rates.gamma;
            eta[k] = e.rates.eta;
            w[k] = emitter_frequency(e, convention);
            den[k] = std::conj(w[k]) - wc;
        }
    }

    // Populations, photon number and pair correlations implied by x.
    CumulantState moments(const Eigen::VectorXcd& x) const {
        CumulantState st;
        st.sigma_z.resize(K);
        st.sigma_plus_a.assign(x.data(), x.data() + K);
        double n = 0.0;
        for (int k = 0; k < K; ++k) {
            n -= 2.0 / kappa * N[k] * g[k] * x[k].imag();
            st.sigma_z[k] = (4.0 * g[k] * x[k].imag() + eta[k] - gamma[k]) / (gamma[k] + eta[k]);
        }
        st.photon_number = n;
        st.pair.resize(K, K);
        for (int k = 0; k < K; ++k)
            for (int q = 0; q < K; ++q)
                st.pair(k, q) = (g[k] * st.sigma_z[k] * std::conj(x[q]) - g[q] * st.sigma_z[q] * x[k]) /
                                (std::conj(w[k]) - w[q]);
        return st;
    }

    Eigen::VectorXcd map(const CumulantState& st) const {
        Eigen::VectorXcd out(K);
        for (int k = 0; k < K; ++k) {
            cplx rhs = g[k] * st.sigma_z[k] * st.photon_number + 0.5 * g[k] * (1.0 + st.sigma_z[k]) -
                       g[k] * st.pair(k, k);
            for (int q = 0; q < K; ++q) rhs += N[q] * g[q] * st.pair(k, q);
            out[k] = rhs / den[k];
        }
        return out;
    }

    Eigen::VectorXcd map(const Eigen::VectorXcd& x) const { return map(moments(x)); }

    // Decoupled populations and zero emitter-photon correlation.
    Eigen::VectorXcd initial() const { return Eigen::VectorXcd::Zero(K); }

    // Time-dependent closure on [s (K), n, x (K complex), C (K*K complex, column-major)].
    std::size_t dynamic_size() const { return static_cast<std::size_t>(K + 1 + 2 * K + 2 * K * K); }

    void rhs(std::span<const double> y, std::span<double> dy) const {
        const auto s = y.subspan(0, K);
        const double n = y[K];
        const auto x = ode::as_complex(y.subspan(K + 1, 2 * K));
        const auto C = ode::as_complex(y.subspan(3 * K + 1));
        auto ds = dy.subspan(0, K);
        auto dx = ode::as_complex(dy.subspan(K + 1, 2 * K));
        auto dC = ode::as_complex(dy.subspan(3 * K + 1));
        const cplx I(0.0, 1.0);
        double dn = -kappa * n;
        for (int k = 0; k < K; ++k) {
            ds[k] = 4.0 * g[k] * x[k].imag() - (gamma[k] + eta[k]) * s[k] + (eta[k] - gamma[k]);
            dn -= 2.0 * N[k] * g[k] * x[k].imag();
            cplx drive = g[k] * s[k] * n + 0.5 * g[k] * (1.0 + s[k]) - g[k] * C[k + K * k];
            for (int q = 0; q < K; ++q) drive += N[q] * g[q] * C[k + K * q];
            dx[k] = I * den[k] * x[k] - I * drive;
            for (int q = 0; q < K; ++q)
                dC[k + K * q] = I * (std::conj(w[k]) - w[q]) * C[k + K * q] -
                                I * (g[k] * s[k] * std::conj(x[q]) - g[q] * s[q] * x[k]);
        }
        dy[K] = dn;
    }

    ode::State ground_state() const {
        ode::State y(dynamic_size(), 0.0);
        for (int k = 0; k < K; ++k) y[k] = -1.0;
        return y;
    }

    Eigen::VectorXcd x_of(const ode::State& y) const {
        Eigen::VectorXcd x(K);
        for (int k = 0; k < K; ++k) x[k] = {y[K + 1 + 2 * k], y[K + 2 + 2 * k]};
        return x;
    }
};

Eigen::VectorXd to_real(const Eigen::VectorXcd& x) {
    Eigen::VectorXd v(2 * x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) v[2 * k] = x[k].real(), v[2 * k + 1] = x[k].imag();
    return v;
}

Eigen::VectorXcd to_complex(const Eigen::VectorXd& v) {
    Eigen::VectorXcd x(v.size() / 2);
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = {v[2 * k], v[2 * k + 1]};
    return x;
}

Eigen::VectorXd residual(const Closure& c, const Eigen::VectorXd& v) {
    const auto x = to_complex(v);
    return to_real(c.map(x) - x);
}

// Newton on F(v) = Phi(v) - v with a forward-difference Jacobian and
// backtracking on |F|. Returns false when no descent step exists.
bool newton(const Closure& c, Eigen::VectorXd& v, double tol, int max_evals, int& evals,
            std::vector<double>& history) {
    const Eigen::Index n = v.size();
    Eigen::VectorXd f = residual(c, v);
    ++evals;
    Eigen::MatrixXd jac(n, n);
    while (evals < max_evals) {
        const double fnorm = f.cwiseAbs().maxCoeff();
        history.push_back(fnorm);
        if (fnorm <= tol * std::max(1.0, v.cwiseAbs().maxCoeff())) return true;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(std::abs(v[j]), 1e-3 * std::max(1e-6, v.cwiseAbs().maxCoeff()));
            Eigen::VectorXd vp = v;
            vp[j] += h;
            jac.col(j) = (residual(c, vp) - f) / h;
        }
        evals += static_cast<int>(n);
        const Eigen::VectorXd step = jac.fullPivLu().solve(-f);
        if (!step.allFinite()) return false;
        double lambda = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40 && evals < max_evals; ++k, lambda *= 0.5) {
            const Eigen::VectorXd trial = v + lambda * step;
            const Eigen::VectorXd ft = residual(c, trial);
            ++evals;
            if (ft.allFinite() && ft.norm() < (1.0 - 1e-4 * lambda) * f.norm()) {
                v = trial;
                f = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            history.push_back(f.cwiseAbs().maxCoeff());
            return f.cwiseAbs().maxCoeff() <= tol * std::max(1.0, v.cwiseAbs().maxCoeff());
        }
    }
    return false;
}

double scale_of(const Eigen::VectorXcd& x) { return std::max(1.0, x.cwiseAbs().maxCoeff()); }

} // namespace

namespace {

// Integrates the time-dependent closure from the ground state until the
// steady-state map is satisfied to `match` (relative) or the time budget ends.
Eigen::VectorXcd relax(const Closure& c, const MeanfieldOptions& opts, std::vector<double>& history) {
    ode::Options o;
    o.abs_tol = 1e-10;
    o.rel_tol = 1e-8;
    ode::State y = c.ground_state();
    const auto rhs = [&c](std::span<const double> a, std::span<double> b) { c.rhs(a, b); };
    for (double t = 0.0; t < opts.relax_time; t += opts.relax_chunk) {
        const std::vector<double> times{t, t + opts.relax_chunk};
        y = ode::integrate(rhs, std::move(y), times, o).back();
        const auto x = c.x_of(y);
        const double res = (c.map(x) - x).cwiseAbs().maxCoeff() / scale_of(x);
        history.push_back(res);
        if (res < opts.relax_match) break;
    }
    return c.x_of(y);
}

// Every population at s_k = target, Re x = 0.
Eigen::VectorXcd inversion_start(const Closure& c, double target) {
    Eigen::VectorXcd x(c.K);
    for (int k = 0; k < c.K; ++k)
        x[k] = {0.0, c.g[k] > 0.0 ? (target * (c.gamma[k] + c.eta[k]) - (c.eta[k] - c.gamma[k])) / (4.0 * c.g[k]) : 0.0};
    return x;
}

// Damped Picard from x; on stall or divergence, Newton from the best iterate.
std::optional<Eigen::VectorXcd> picard_then_newton(const Closure& c, Eigen::VectorXcd x, const MeanfieldOptions& opts,
                                                   int& iterations, bool& used_newton, std::vector<double>& history) {
    Eigen::VectorXcd best = x;
    double best_res = std::numeric_limits<double>::infinity();
    double window_start_best = best_res;
    for (int it = 0; it < opts.max_picard; ++it) {
        const auto st = c.moments(x);
        const Eigen::VectorXcd fx = c.map(st);
        const double res = (fx - x).cwiseAbs().maxCoeff();
        history.push_back(res);
        ++iterations;
        if (!std::isfinite(res) || st.photon_number > opts.photon_cap || res > 1e3 * best_res) break;
        if (res < best_res) best_res = res, best = x;
        const Eigen::VectorXcd step = opts.damping * (fx - x);
        x += step;
        if (step.cwiseAbs().maxCoeff() < opts.tolerance * scale_of(x)) return x;
        if ((it + 1) % opts.stall_window == 0) {
            if (!(best_res < 0.5 * window_start_best)) break;
            window_start_best = best_res;
        }
    }
    used_newton = true;
    Eigen::VectorXd v = to_real(best);
    int evals = 0;
    const bool ok = newton(c, v, opts.tolerance, opts.max_newton_evals, evals, history);
    iterations += evals;
    if (!ok) return std::nullopt;
    return to_complex(v);
}

} // namespace

MeanfieldSolution solve_cumulant_steady_state(const EmitterEnsembleSpec& spec, const MeanfieldOptions& opts) {
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw InvalidArgument("damping must lie in (0, 1]");
    const Closure c(spec, opts.frequency);
    std::vector<double> history;
    MeanfieldSolution sol;

    const auto accept = [&](const Eigen::VectorXcd& x) {
        sol.state = c.moments(x);
        if (!sol.state.is_physical(1e-8)) return false;
        sol.residual = (c.map(sol.state) - x).cwiseAbs().maxCoeff();
        sol.radiation_rate = c.kappa * sol.state.photon_number;
        return true;
    };

    // Several fixed points can coexist above threshold; the steady state is the
    // one the time-dependent closure relaxes to from the ground state. When the
    // closure does not settle (limit cycle) the stationary direct root is kept
    // and flagged unstable.
    const auto direct = picard_then_newton(c, c.initial(), opts, sol.iterations, sol.used_newton, history);
    const std::size_t mark = history.size();
    const Eigen::VectorXcd relaxed = relax(c, opts, history);
    const bool settled = history.size() > mark && history.back() < opts.relax_match;
    if (direct) {
        const bool same = (*direct - relaxed).cwiseAbs().maxCoeff() <= opts.relax_agreement * scale_of(*direct);
        if ((same || !settled) && accept(*direct)) {
            sol.stable = same && settled;
            return sol;
        }
    }
    sol.used_newton = true;
    std::vector<Eigen::VectorXcd> starts{relaxed};
    // Without a settled relaxation, any physical stationary root is reported.
    if (!settled)
        for (double target : {0.0, 0.5, -0.5, 0.9, -0.9}) starts.push_back(inversion_start(c, target));
    for (const auto& start : starts) {
        Eigen::VectorXd v = to_real(start);
        int evals = 0;
        const bool ok = newton(c, v, opts.tolerance, opts.max_newton_evals, evals, history);
        sol.iterations += evals;
        if (ok && accept(to_complex(v))) {
            sol.stable = settled;
            return sol;
        }
    }
    throw ConvergenceError("no physical mean-field fixed point found", std::move(history));
}

EmitterEnsembleSpec gaussian_ensemble(const SweepParams& p, double w, double delta, double eta) {
    const RateSet rates(p.rates.gamma, p.rates.chi, eta);
    const double mu = p.cavity.omega_c + delta;
    if (w == 0.0) return EmitterEnsembleSpec({SubEnsemble(p.total_count, mu, p.g, rates)}, p.cavity);
    if (!(w > 0.0)) throw InvalidArgument("inhomogeneous width must be >= 0");
    // Cells wider than the cavity line put whole cells on resonance; refine to at most max_bin_width.
    int bins = p.n_bins;
    const int needed = static_cast<int>(std::ceil(2.0 * p.span * w / (p.max_bin_width * p.cavity.kappa) - 1e-9));
    if (needed > bins) bins = needed % 2 == 0 ? needed + 1 : needed;
    return discretize_gaussian(GaussianDistributionSpec(mu, w, bins, p.span), p.total_count, p.g, rates, p.cavity);
}

namespace {

struct Point {
    double w, delta;
};

// Radiation for every (point, eta) pair, solved in parallel.
std::vector<std::vector<double>> radiation_table(const SweepParams& p, const std::vector<Point>& points,
                                                 std::span<const double> eta_grid) {
    if (eta_grid.size() < 2) throw InvalidArgument("pump grid needs at least two points");
    for (std::size_t i = 0; i < eta_grid.size(); ++i)
        if (!(eta_grid[i] > 0.0) || (i > 0 && !(eta_grid[i] > eta_grid[i - 1])))
            throw InvalidArgument("pump grid must be positive and increasing");
    const std::size_t ne = eta_grid.size();
    std::vector<std::vector<double>> out(points.size(), std::vector<double>(ne));
    parallel::for_each_index(points.size() * ne, [&](std::size_t idx) {
        const auto& pt = points[idx / ne];
        const double eta = eta_grid[idx % ne];
        out[idx / ne][idx % ne] = solve_cumulant_steady_state(gaussian_ensemble(p, pt.w, pt.delta, eta), p.solver).radiation_rate;
    });
    return out;
}

PumpCurve make_curve(double w, double delta, std::span<const double> eta_grid, std::vector<double> radiation) {
    PumpCurve c;
    c.w = w;
    c.delta = delta;
    c.eta.assign(eta_grid.begin(), eta_grid.end());
    c.radiation = std::move(radiation);
    c.slopes = dicke::log_log_slopes(c.eta, c.radiation);
    c.max_slope = *std::max_element(c.slopes.begin(), c.slopes.end());
    return c;
}

} // namespace

PumpCurve pump_curve(const SweepParams& p, double w, double delta, std::span<const double> eta_grid) {
    auto table = radiation_table(p, {{w, delta}}, eta_grid);
    return make_curve(w, delta, eta_grid, std::move(table[0]));
}

std::vector<PumpCurve> inhomogeneity_sweep(const SweepParams& p, std::span<const double> w_list,
                                           std::span<const double> eta_grid) {
    std::vector<Point> points;
    for (double w : w_list) points.push_back({w, 0.0});
    auto table = radiation_table(p, points, eta_grid);
    std::vector<PumpCurve> curves;
    for (std::size_t i = 0; i < points.size(); ++i) curves.push_back(make_curve(w_list[i], 0.0, eta_grid, std::move(table[i])));
    return curves;
}

DetuningSweep detuning_sweep_and_average(const SweepParams& p, double w, std::span<const double> delta_grid,
                                         std::span<const double> eta_grid, double weight_fwhm) {
    const std::size_t nd = delta_grid.size();
    if (nd == 0) throw InvalidArgument("empty detuning grid");
    if (!(weight_fwhm > 0.0)) throw InvalidArgument("weight FWHM must be positive");
    const double dmax = std::abs(delta_grid.back());
    for (std::size_t i = 0; i < nd; ++i) {
        if (i > 0 && !(delta_grid[i] > delta_grid[i - 1])) throw InvalidArgument("detuning grid must increase");
        if (std::abs(delta_grid[i] + delta_grid[nd - 1 - i]) > 1e-9 * std::max(1.0, dmax))
            throw InvalidArgument("detuning grid must be symmetric about zero");
    }

    std::vector<Point> points;
    for (double d : delta_grid) points.push_back({w, d});
    auto table = radiation_table(p, points, eta_grid);

    DetuningSweep out;
    // Trapezoid cell widths times the Gaussian density; a single point gets unit weight.
    const double sigma = gaussian_sigma_from_fwhm(weight_fwhm);
    std::vector<double> weight(nd, 1.0);
    if (nd > 1)
        for (std::size_t i = 0; i < nd; ++i) {
            const double lo = i == 0 ? delta_grid[0] : 0.5 * (delta_grid[i - 1] + delta_grid[i]);
            const double hi = i + 1 == nd ? delta_grid[nd - 1] : 0.5 * (delta_grid[i] + delta_grid[i + 1]);
            weight[i] = (hi - lo) * std::exp(-0.5 * delta_grid[i] * delta_grid[i] / (sigma * sigma));
        }
    double wsum = 0.0;
    for (double x : weight) wsum += x;

    std::vector<double> avg(eta_grid.size(), 0.0);
    for (std::size_t i = 0; i < nd; ++i) {
        for (std::size_t j = 0; j < eta_grid.size(); ++j) avg[j] += weight[i] / wsum * table[i][j];
        out.curves.push_back(make_curve(w, delta_grid[i], eta_grid, std::move(table[i])));
    }
    out.averaged = make_curve(w, 0.0, eta_grid, std::move(avg));
    out.averaged.weighted = true;
    return out;
}

EffectiveDephasing effective_dephasing(const SweepParams& p, double w, std::span<const double> eta_grid,
                                       double chi_lo, double chi_hi) {
    if (!(chi_lo > 0.0 && chi_hi > chi_lo)) throw InvalidArgument("invalid dephasing search interval");
    const auto target = pump_curve(p, w, 0.0, eta_grid).radiation;
    const auto mismatch = [&](double log_chi) {
        SweepParams q = p;
        q.rates = RateSet(p.rates.gamma, std::exp(log_chi), p.rates.eta);
        std::vector<double> I(eta_grid.size());
        for (std::size_t j = 0; j < eta_grid.size(); ++j)
            I[j] = solve_cumulant_steady_state(gaussian_ensemble(q, 0.0, 0.0, eta_grid[j]), q.solver).radiation_rate;
        double s = 0.0;
        for (std::size_t j = 0; j < I.size(); ++j) s += std::pow(std::log(I[j] / target[j]), 2);
        return std::sqrt(s / static_cast<double>(I.size()));
    };
    const auto [log_chi, rms] = boost::math::tools::brent_find_minima(mismatch, std::log(chi_lo), std::log(chi_hi), 30);
    return {std::exp(log_chi), rms};
}

} // namespace dickecav::meanfield

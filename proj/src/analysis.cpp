#include "dickecav/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "dickecav/error.hpp"
#include "dickecav/model.hpp"

namespace dickecav::analysis {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

using Residual = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

struct Functor : Eigen::DenseFunctor<double> {
    Functor(int n, int m, const Residual& f) : DenseFunctor(n, m), f_(f) {}
    int operator()(const InputType& x, ValueType& r) const {
        f_(x, r);
        // A trial step outside the model's domain is rejected by the damping, not fatal.
        r = r.unaryExpr([](double v) { return std::isfinite(v) ? v : 1e100; });
        return 0;
    }
    const Residual& f_;
};

const char* status_name(Eigen::LevenbergMarquardtSpace::Status s) {
    using namespace Eigen::LevenbergMarquardtSpace;
    switch (s) {
    case RelativeReductionTooSmall: return "relative_reduction";
    case RelativeErrorTooSmall: return "relative_error";
    case RelativeErrorAndReductionTooSmall: return "relative_error_and_reduction";
    case CosinusTooSmall: return "orthogonal_gradient";
    case TooManyFunctionEvaluation: return "too_many_evaluations";
    case FtolTooSmall: return "ftol_limit";
    case XtolTooSmall: return "xtol_limit";
    case GtolTooSmall: return "gtol_limit";
    case UserAsked: return "user_stop";
    default: return "improper_input";
    }
}

// Internal coordinates: log-transformed entries map through exp to the reported value.
struct Coordinates {
    std::vector<std::string> names;
    std::vector<bool> log_scale;

    double natural(const Eigen::VectorXd& x, int i) const { return log_scale[i] ? std::exp(x[i]) : x[i]; }
    double internal(double v, int i) const { return log_scale[i] ? std::log(v) : v; }
};

// Damped Gauss-Newton (Levenberg-Marquardt) on weighted residuals, then the
// covariance in natural coordinates from a central-difference Jacobian.
FitResult least_squares(const Residual& f, int m, const Coordinates& coords, Eigen::VectorXd x, bool weighted,
                        int max_evaluations) {
    const int n = static_cast<int>(x.size());
    if (m <= n) throw InvalidArgument("fit needs more data points than free parameters");
    Functor functor(n, m, f);
    Eigen::NumericalDiff<Functor> diff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor>> lm(diff);
    lm.setMaxfev(max_evaluations);
    const auto status = lm.minimize(x);
    using namespace Eigen::LevenbergMarquardtSpace;
    Eigen::VectorXd r(m);
    f(x, r);
    if (status == TooManyFunctionEvaluation || status == UserAsked || status == ImproperInputParameters ||
        !r.allFinite() || !x.allFinite() || r.cwiseAbs().maxCoeff() >= 1e100)
        throw ConvergenceError(std::string("least-squares fit failed: ") + status_name(status),
                               {r.allFinite() ? r.norm() : inf});

    FitResult out;
    out.names = coords.names;
    out.status = status_name(status);
    out.evaluations = static_cast<int>(lm.nfev());
    const double chi2 = r.squaredNorm();
    out.residual_rms = std::sqrt(chi2 / m);
    out.reduced_chi2 = chi2 / (m - n);

    // Jacobian in internal coordinates, where time constants enter through their logarithm
    // and the conditioning is unit-free.
    Eigen::MatrixXd J(m, n);
    Eigen::VectorXd rp(m), rm(m), dnat(n);
    for (int j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        f(xp, rp);
        f(xm, rm);
        J.col(j) = (rp - rm) / (2.0 * h);
        dnat[j] = coords.log_scale[j] ? std::exp(x[j]) : 1.0;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J.transpose() * J);
    const Eigen::VectorXd lam = eig.eigenvalues();
    const double lmax = lam.maxCoeff();
    const double lmin = lam.minCoeff();
    out.condition_number = lmin > 0.0 ? lmax / lmin : inf;
    out.ill_conditioned = !(out.condition_number < 1e12);

    // Pseudo-inverse; parameters touching a null direction get an infinite error.
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    std::vector<bool> unidentified(n, false);
    for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd v = eig.eigenvectors().col(k);
        if (lam[k] > 1e-12 * lmax) {
            cov += v * v.transpose() / lam[k];
        } else {
            for (int j = 0; j < n; ++j)
                if (std::abs(v[j]) > 1e-6) unidentified[j] = true;
        }
    }
    const double variance_scale = weighted ? 1.0 : out.reduced_chi2;
    out.covariance = variance_scale * dnat.asDiagonal() * cov * dnat.asDiagonal();
    for (int j = 0; j < n; ++j) {
        out.values.push_back(coords.natural(x, j));
        out.sigma.push_back(unidentified[j] || !(lmax > 0.0) ? inf : std::sqrt(std::max(0.0, out.covariance(j, j))));
    }
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) throw InvalidArgument(what);
}

// Gaussian (std s) smoothed e^{-|tau|/T}.
double smoothed_exponential(double tau, double T, double s) {
    const double r = s / T;
    auto half = [&](double t) {
        const double u = (r - t / s) / std::numbers::sqrt2;
        if (u >= 0.0) return 0.5 * std::exp(-0.5 * t * t / (s * s)) * erfcx(u);
        return 0.5 * std::exp(0.5 * r * r - t / T) * std::erfc(u);
    };
    return half(tau) + half(-tau);
}

// Signed square root of the Poisson deviance; its sum of squares is -2 ln L up to a constant,
// so least squares on it is the maximum-likelihood fit without the bias of count-based weights.
double poisson_deviance_residual(double counts, double mean) {
    mean = std::max(mean, 1e-12);
    const double d = counts > 0.0 ? mean - counts + counts * std::log(counts / mean) : mean;
    const double r = std::sqrt(2.0 * std::max(d, 0.0));
    return counts >= mean ? -r : r;
}

} // namespace

void G2FitModel::validate() const {
    require(tau1 > 0.0 && tau2 > 0.0 && tau3 > 0.0, "g2 model: time constants must be positive");
    require(irf_fwhm >= 0.0, "g2 model: IRF width must be non-negative");
    require(a >= 0.0 && b >= 0.0 && c >= 0.0, "g2 model: amplitudes must be non-negative");
    require(std::isfinite(a + b + c + tau1 + tau2 + tau3 + irf_fwhm), "g2 model: parameters must be finite");
}

double erfcx(double x) {
    if (x < 25.0) return std::exp(x * x) * std::erfc(x);
    // Asymptotic series; the next term is below 1e-10 relative at x = 25.
    const double y = 1.0 / (2.0 * x * x);
    return (1.0 - y * (1.0 - 3.0 * y * (1.0 - 5.0 * y))) / (x * std::sqrt(std::numbers::pi));
}

double g2_intrinsic(const G2FitModel& m, double tau) {
    const double t = std::abs(tau);
    return 1.0 - (m.a + m.b) * std::exp(-t / m.tau1) + m.b * std::exp(-t / m.tau2) +
           m.c * std::exp(-0.5 * tau * tau / (m.tau3 * m.tau3));
}

double g2_measured(const G2FitModel& m, double tau) {
    if (m.irf_fwhm == 0.0) return g2_intrinsic(m, tau);
    const double s = gaussian_sigma_from_fwhm(m.irf_fwhm);
    const double w2 = m.tau3 * m.tau3 + s * s;
    return 1.0 - (m.a + m.b) * smoothed_exponential(tau, m.tau1, s) + m.b * smoothed_exponential(tau, m.tau2, s) +
           m.c * m.tau3 / std::sqrt(w2) * std::exp(-0.5 * tau * tau / w2);
}

double FitResult::value(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("unknown fit parameter " + name);
    return values[it - names.begin()];
}

double FitResult::error(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("unknown fit parameter " + name);
    return sigma[it - names.begin()];
}

G2FitResult fit_g2(const correlations::CorrelationTrace& trace, const G2FitModel& initial, double purity,
                   const G2FitOptions& opts) {
    trace.validate();
    initial.validate();
    require(purity > 0.0 && purity <= 1.0, "purity must lie in (0, 1]");
    require(initial.irf_fwhm > 0.0 || !opts.fit_irf, "a fitted IRF needs a positive initial width");

    struct Free {
        const char* name;
        double G2FitModel::*field;
        bool log_scale;
    };
    std::vector<Free> free{{"a", &G2FitModel::a, false},
                           {"b", &G2FitModel::b, false},
                           {"tau1", &G2FitModel::tau1, true},
                           {"tau2", &G2FitModel::tau2, true},
                           {"c", &G2FitModel::c, false}};
    if (opts.fit_tau3) free.push_back({"tau3", &G2FitModel::tau3, true});
    if (opts.fit_irf) free.push_back({"irf_fwhm", &G2FitModel::irf_fwhm, true});
    Coordinates coords;
    for (const auto& p : free) {
        coords.names.emplace_back(p.name);
        coords.log_scale.push_back(p.log_scale);
    }
    const int n = static_cast<int>(free.size());
    // The normalization, when free, is the last coordinate.
    const int dim = n + (opts.fit_normalization ? 1 : 0);
    if (opts.fit_normalization) {
        coords.names.emplace_back("normalization");
        coords.log_scale.push_back(false);
    }
    Eigen::VectorXd x(dim);
    for (int i = 0; i < n; ++i) x[i] = coords.internal(initial.*free[i].field, i);
    if (opts.fit_normalization) x[n] = 1.0;

    const int m = static_cast<int>(trace.tau.size());
    const bool weighted = opts.plateau_counts > 0.0;
    const double C = opts.plateau_counts;

    auto unpack = [&](const Eigen::VectorXd& v) {
        G2FitModel g = initial;
        for (int i = 0; i < n; ++i) g.*free[i].field = coords.natural(v, i);
        return g;
    };
    const Residual f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
        const G2FitModel g = unpack(v);
        r.resize(m);
        const double scale = opts.fit_normalization ? v[n] : 1.0;
        for (int i = 0; i < m; ++i) {
            const double mu = scale * g2_measured(g, trace.tau[i]);
            r[i] = weighted ? poisson_deviance_residual(trace.values[i] * C, mu * C) : mu - trace.values[i];
        }
    };

    G2FitResult out;
    out.fit = least_squares(f, m, coords, x, weighted, opts.max_evaluations);
    Eigen::VectorXd best(dim);
    for (int i = 0; i < dim; ++i) best[i] = coords.internal(out.fit.values[i], i);
    out.model = unpack(best);
    out.normalization = opts.fit_normalization ? best[n] : 1.0;
    out.purity = purity;
    const double p2 = purity * purity;
    out.a_corrected = out.model.a / p2;
    out.b_corrected = out.model.b / p2;
    out.c_corrected = out.model.c / p2;
    out.measured_peak = g2_measured(out.model, 0.0);
    out.deconvolved_peak = g2_intrinsic(out.model, 0.0);
    out.intrinsic_peak = 1.0 + (out.deconvolved_peak - 1.0) / p2;
    return out;
}

NormalizedHistogram normalize_histogram(std::span<const double> tau_ns, std::span<const double> coincidences) {
    require(tau_ns.size() == coincidences.size() && tau_ns.size() >= 2, "histogram: delay and count columns differ");
    const double cut = tau_ns.front() + 0.8 * (tau_ns.back() - tau_ns.front());
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < tau_ns.size(); ++i) {
        require(std::isfinite(coincidences[i]) && coincidences[i] >= 0.0, "histogram: counts must be finite and >= 0");
        if (tau_ns[i] >= cut) {
            sum += coincidences[i];
            ++count;
        }
    }
    require(count > 0 && sum > 0.0, "histogram: empty plateau");
    NormalizedHistogram out;
    out.plateau = sum / count;
    out.trace.tau.assign(tau_ns.begin(), tau_ns.end());
    for (double c : coincidences) out.trace.values.push_back(c / out.plateau);
    out.trace.source = correlations::TraceSource::measurement;
    out.trace.validate();
    return out;
}

EmitterNumber estimate_emitter_number(double a, double purity, double sigma_a, double sigma_p) {
    require(a > 0.0 && std::isfinite(a), "antibunching amplitude must be positive");
    require(purity > 0.0 && purity <= 1.0, "purity must lie in (0, 1]");
    require(sigma_a >= 0.0 && sigma_p >= 0.0, "uncertainties must be non-negative");
    const double n = purity * purity / a;
    const double rel = std::hypot(sigma_a / a, 2.0 * sigma_p / purity);
    return {n, n * rel, a <= purity * purity};
}

double thermal_bunching_limit(double n) {
    require(n >= 1.0, "emitter number must be >= 1");
    return 2.0 * (1.0 - 1.0 / n);
}

SaturationFit fit_saturation_lifetime(std::span<const LifetimeRecord> records) {
    std::set<double> distinct;
    bool any_weight = false, all_weight = true;
    for (const auto& r : records) {
        require(std::isfinite(r.intensity) && r.intensity >= 0.0, "lifetime: intensities must be >= 0");
        require(std::isfinite(r.tau1) && r.tau1 > 0.0, "lifetime: lifetimes must be positive");
        require(r.sigma >= 0.0, "lifetime: uncertainties must be >= 0");
        distinct.insert(r.intensity);
        any_weight |= r.sigma > 0.0;
        all_weight &= r.sigma > 0.0;
    }
    require(distinct.size() >= 3, "lifetime fit needs at least three distinct intensities");
    require(any_weight == all_weight, "lifetime: give an uncertainty for every record or for none");
    const int m = static_cast<int>(records.size());

    // 1/tau = 1/tau0 + sigma I is linear; its weighted solution seeds the nonlinear fit.
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        const double w = all_weight ? records[i].tau1 * records[i].tau1 / records[i].sigma : 1.0;
        A(i, 0) = w;
        A(i, 1) = w * records[i].intensity;
        y[i] = w / records[i].tau1;
    }
    const Eigen::Vector2d lin = A.colPivHouseholderQr().solve(y);
    double inv_tau0 = lin[0];
    if (!(inv_tau0 > 0.0)) inv_tau0 = 1.0 / std::max_element(records.begin(), records.end(), [](auto& p, auto& q) {
                                                 return p.tau1 < q.tau1;
                                             })->tau1;

    const Coordinates coords{{"tau0", "sigma"}, {true, false}};
    Eigen::VectorXd x(2);
    x << -std::log(inv_tau0), lin[1];
    const Residual f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
        const double tau0 = std::exp(v[0]);
        r.resize(m);
        for (int i = 0; i < m; ++i) {
            const double model = tau0 / (1.0 + v[1] * records[i].intensity * tau0);
            r[i] = (model - records[i].tau1) / (all_weight ? records[i].sigma : 1.0);
        }
    };
    SaturationFit out;
    out.fit = least_squares(f, m, coords, x, all_weight, 2000);
    if (out.fit.ill_conditioned) throw InvalidArgument("lifetime fit: degenerate design matrix");
    out.tau0 = out.fit.values[0];
    out.sigma = out.fit.values[1];
    out.tau0_error = out.fit.sigma[0];
    out.sigma_error = out.fit.sigma[1];
    return out;
}

PurcellFactor purcell_factor(double tau0, double tauc, double debye_waller) {
    require(tau0 > 0.0 && tauc > 0.0, "lifetimes must be positive");
    require(debye_waller > 0.0 && debye_waller <= 1.0, "Debye-Waller factor must lie in (0, 1]");
    const double eff = tau0 / tauc - 1.0;
    return {eff, eff / debye_waller};
}

std::string to_string(Channel c) { return c == Channel::zpl ? "ZPL" : "PSB"; }

Channel channel_from_string(const std::string& s) {
    std::string u;
    for (char ch : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (u == "ZPL") return Channel::zpl;
    if (u == "PSB") return Channel::psb;
    throw InvalidArgument("unknown channel '" + s + "'");
}

PowerLawFit fit_power_law(std::span<const PowerSweepRecord> records, const PowerLawOptions& opts) {
    require(opts.power_min <= opts.power_max, "power range is empty");
    std::vector<const PowerSweepRecord*> used;
    for (const auto& r : records) {
        require(std::isfinite(r.power) && r.power > 0.0, "power must be positive");
        if (r.power < opts.power_min || r.power > opts.power_max) continue;
        require(std::isfinite(r.rate) && r.rate > 0.0, "power-law fit needs positive rates");
        used.push_back(&r);
    }
    require(used.size() >= 3, "power-law fit needs at least three records in range");
    for (const auto* r : used) require(r->channel == used.front()->channel, "power-law fit mixes channels");

    const int m = static_cast<int>(used.size());
    const bool weighted = opts.integration_time > 0.0;
    // Weighted normal equations for ln I = ln c + k ln P; var(ln I) = 1/counts.
    Eigen::Matrix2d XtWX = Eigen::Matrix2d::Zero();
    Eigen::Vector2d XtWy = Eigen::Vector2d::Zero();
    for (const auto* r : used) {
        const double w = weighted ? r->rate * opts.integration_time : 1.0;
        const Eigen::Vector2d row(1.0, std::log(r->power));
        XtWX += w * row * row.transpose();
        XtWy += w * row * std::log(r->rate);
    }
    require(std::abs(XtWX.determinant()) > 1e-12 * XtWX.squaredNorm(), "power-law fit: degenerate powers");
    const Eigen::Matrix2d cov = XtWX.inverse();
    const Eigen::Vector2d beta = cov * XtWy;
    double chi2 = 0.0;
    for (const auto* r : used) {
        const double w = weighted ? r->rate * opts.integration_time : 1.0;
        const double e = std::log(r->rate) - beta[0] - beta[1] * std::log(r->power);
        chi2 += w * e * e;
    }
    const double scale = weighted ? 1.0 : chi2 / (m - 2);
    return {beta[1], std::sqrt(scale * cov(1, 1)), beta[0], m, used.front()->channel};
}

} // namespace dickecav::analysis

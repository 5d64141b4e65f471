#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "dickecav/analysis.hpp"
#include "dickecav/dicke.hpp"
#include "dickecav/error.hpp"

using namespace dickecav;
using namespace dickecav::analysis;

namespace {

G2FitModel reference_model() {
    G2FitModel m;
    m.a = 0.3;
    m.b = 0.2;
    m.tau1 = 5.0;
    m.tau2 = 50.0;
    m.c = 0.7;
    m.tau3 = 0.1;
    m.irf_fwhm = 0.4;
    return m;
}

// Poisson histogram with `plateau` coincidences per bin at g2 = 1.
correlations::CorrelationTrace poisson_trace(const G2FitModel& m, double plateau, std::mt19937_64& rng,
                                             double half_range = 400.0, double bin = 0.1) {
    correlations::CorrelationTrace t;
    t.source = correlations::TraceSource::measurement;
    const int n = static_cast<int>(std::lround(half_range / bin));
    for (int i = -n; i <= n; ++i) {
        const double tau = i * bin;
        std::poisson_distribution<long> pd(plateau * g2_measured(m, tau));
        t.tau.push_back(tau);
        t.values.push_back(static_cast<double>(pd(rng)) / plateau);
    }
    return t;
}

// Direct quadrature of the IRF convolution.
double convolved_by_quadrature(const G2FitModel& m, double tau) {
    const double s = gaussian_sigma_from_fwhm(m.irf_fwhm);
    const int n = 40000;
    const double lo = -10.0 * s, h = 20.0 * s / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = lo + i * h;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        sum += w * g2_intrinsic(m, tau - t) * std::exp(-0.5 * t * t / (s * s));
    }
    return sum * h / (s * std::sqrt(2.0 * std::numbers::pi));
}

} // namespace

TEST_CASE("g2 model limits") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        G2FitModel m;
        m.a = u(rng);
        m.b = u(rng);
        m.c = 2.0 * u(rng);
        m.tau1 = 0.1 + 10.0 * u(rng);
        m.tau2 = 1.0 + 100.0 * u(rng);
        m.tau3 = 0.01 + u(rng);
        m.irf_fwhm = u(rng);
        CHECK(g2_intrinsic(m, std::numeric_limits<double>::infinity()) == 1.0);
        CHECK(g2_measured(m, std::numeric_limits<double>::infinity()) == 1.0);
        CHECK(g2_measured(m, -1e6) == 1.0);
        CHECK(g2_measured(m, 0.7) == doctest::Approx(g2_measured(m, -0.7)).epsilon(1e-12));
        // Zero-width IRF is the identity.
        G2FitModel sharp = m;
        sharp.irf_fwhm = 1e-7;
        for (double tau : {0.0, 0.05, 0.3, 2.0, 40.0})
            CHECK(g2_measured(sharp, tau) == doctest::Approx(g2_intrinsic(m, tau)).epsilon(1e-5));
    }
    const auto m = reference_model();
    CHECK(g2_intrinsic(m, 0.0) == doctest::Approx(1.0 - m.a + m.c));
}

TEST_CASE("closed-form IRF convolution matches quadrature") {
    for (double irf : {0.05, 0.4, 3.0}) {
        auto m = reference_model();
        m.irf_fwhm = irf;
        m.tau1 = 0.3;
        for (double tau : {0.0, 0.1, -0.25, 1.0, 5.0}) {
            CAPTURE(irf);
            CAPTURE(tau);
            CHECK(g2_measured(m, tau) == doctest::Approx(convolved_by_quadrature(m, tau)).epsilon(1e-7));
        }
    }
}

TEST_CASE("scaled complementary error function") {
    for (double x : {-5.0, -0.3, 0.0, 1.0, 10.0, 24.0})
        CHECK(erfcx(x) == doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-12));
    // Continuous across the switch to the asymptotic series.
    CHECK(erfcx(25.0 - 1e-12) == doctest::Approx(erfcx(25.0)).epsilon(1e-10));
    CHECK(erfcx(1e8) == doctest::Approx(1.0 / (1e8 * std::sqrt(std::numbers::pi))).epsilon(1e-12));
}

TEST_CASE("g2 fit absorbs a misestimated plateau") {
    std::mt19937_64 rng(8);
    const auto truth = reference_model();
    auto trace = poisson_trace(truth, 2000.0, rng);
    for (double& v : trace.values) v /= 1.01; // plateau read 1% high
    G2FitOptions opts;
    opts.plateau_counts = 2000.0 * 1.01;
    const auto free = fit_g2(trace, truth, 1.0, opts);
    CHECK(std::abs(free.normalization - 1.0 / 1.01) <= 2.0 * free.fit.error("normalization"));
    CHECK(std::abs(free.model.tau2 - truth.tau2) <= 2.0 * free.fit.error("tau2"));
    CHECK(free.fit.reduced_chi2 == doctest::Approx(1.0).epsilon(0.05));
    opts.fit_normalization = false;
    const auto held = fit_g2(trace, truth, 1.0, opts);
    CHECK(held.normalization == 1.0);
    CHECK(held.fit.reduced_chi2 > free.fit.reduced_chi2 + 0.1);
}

TEST_CASE("g2 fit recovers generating parameters") {
    std::mt19937_64 rng(5);
    const auto truth = reference_model();
    const double plateau = 1000.0;
    const auto trace = poisson_trace(truth, plateau, rng);
    G2FitModel start;
    start.a = 0.2;
    start.b = 0.1;
    start.tau1 = 3.0;
    start.tau2 = 30.0;
    start.c = 0.4;
    G2FitOptions opts;
    opts.plateau_counts = plateau;
    opts.fit_normalization = false; // the trace is divided by the exact plateau
    const auto res = fit_g2(trace, start, 1.0, opts);
    REQUIRE(res.fit.names.size() == 5);
    const double want[] = {truth.a, truth.b, truth.tau1, truth.tau2, truth.c};
    for (int i = 0; i < 5; ++i) {
        CAPTURE(res.fit.names[i]);
        CHECK(std::abs(res.fit.values[i] - want[i]) <= 2.0 * res.fit.sigma[i]);
    }
    CHECK_FALSE(res.fit.ill_conditioned);
    CHECK(res.fit.reduced_chi2 == doctest::Approx(1.0).epsilon(0.05));
    CHECK(res.intrinsic_peak == doctest::Approx(res.deconvolved_peak));

    SUBCASE("free peak width and IRF") {
        opts.fit_tau3 = true;
        opts.fit_irf = true;
        start.tau3 = 0.2;
        start.irf_fwhm = 0.5;
        const auto wide = fit_g2(trace, start, 1.0, opts);
        REQUIRE(wide.fit.names.size() == 7);
        CHECK(wide.fit.value("a") == doctest::Approx(truth.a).epsilon(0.1));
        // Only the convolved peak area is well determined.
        CHECK(wide.measured_peak == doctest::Approx(res.measured_peak).epsilon(0.02));
        CHECK(wide.fit.error("c") > res.fit.error("c"));
    }
}

TEST_CASE("flat histogram gives a flat fit") {
    G2FitModel flat;
    flat.irf_fwhm = 0.4;
    correlations::CorrelationTrace t;
    t.source = correlations::TraceSource::measurement;
    for (int i = -500; i <= 500; ++i) {
        t.tau.push_back(0.2 * i);
        t.values.push_back(1.0);
    }
    G2FitModel start = flat;
    start.a = 0.1;
    start.b = 0.05;
    start.c = 0.2;
    const auto res = fit_g2(t, start, 1.0);
    for (double tau : {0.0, 0.3, 4.0, 60.0}) CHECK(g2_measured(res.model, tau) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(res.model.a) < 1e-6);
    CHECK(std::abs(res.model.c) < 1e-6);
    CHECK(res.fit.ill_conditioned);
}

TEST_CASE("purity correction of the bunching peak") {
    std::mt19937_64 rng(3);
    auto truth = reference_model();
    truth.a = 0.0167;
    truth.b = 0.0;
    const auto trace = poisson_trace(truth, 5000.0, rng, 100.0);
    G2FitModel start = truth;
    start.b = 0.01;
    G2FitOptions opts;
    opts.plateau_counts = 5000.0;
    for (double p : {1.0, 0.5, 0.2}) {
        const auto res = fit_g2(trace, start, p, opts);
        CHECK(res.intrinsic_peak - 1.0 == doctest::Approx((res.deconvolved_peak - 1.0) / (p * p)));
        CHECK(res.a_corrected == doctest::Approx(res.model.a / (p * p)));
        CHECK(res.c_corrected == doctest::Approx(res.model.c / (p * p)));
        CHECK(res.measured_peak == doctest::Approx(g2_measured(res.model, 0.0)));
    }
}

TEST_CASE("invalid g2 fit input") {
    correlations::CorrelationTrace t;
    t.source = correlations::TraceSource::measurement;
    t.tau = {-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
    t.values.assign(9, 1.0);
    auto m = reference_model();
    CHECK_THROWS_AS(fit_g2(t, m, 0.0), InvalidArgument);
    CHECK_THROWS_AS(fit_g2(t, m, 1.5), InvalidArgument);
    m.tau1 = -1.0;
    CHECK_THROWS_AS(fit_g2(t, m, 1.0), InvalidArgument);
    t.tau = {0.0, 1.0, 2.0};
    t.values = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(fit_g2(t, reference_model(), 1.0), InvalidArgument);
}

TEST_CASE("histogram normalization uses the last fifth of the range") {
    std::vector<double> tau, counts;
    for (int i = 0; i <= 100; ++i) {
        tau.push_back(i);
        counts.push_back(i >= 80 ? 400.0 : 100.0);
    }
    const auto h = normalize_histogram(tau, counts);
    CHECK(h.plateau == doctest::Approx(400.0));
    CHECK(h.trace.values[0] == doctest::Approx(0.25));
    CHECK(h.trace.source == correlations::TraceSource::measurement);
    std::vector<double> zeros(tau.size(), 0.0);
    CHECK_THROWS_AS(normalize_histogram(tau, zeros), InvalidArgument);
}

TEST_CASE("emitter number from the antibunching amplitude") {
    CHECK(estimate_emitter_number(1.0, 1.0).n == doctest::Approx(1.0));
    CHECK(estimate_emitter_number(1.0, 1.0).valid);
    CHECK(estimate_emitter_number(0.0167, 0.5).n == doctest::Approx(15.0).epsilon(0.01));
    CHECK(estimate_emitter_number(0.01, 1.0).n == doctest::Approx(100.0));
    CHECK_FALSE(estimate_emitter_number(0.3, 0.5).valid);
    for (double n : {1.0, 2.0, 7.0, 15.0, 100.0, 1e4})
        for (double p : {0.05, 0.5, 1.0}) CHECK(estimate_emitter_number(p * p / n, p).n == doctest::Approx(n).epsilon(1e-12));
    // First-order propagation against finite differences.
    const double a = 0.02, p = 0.6, sa = 0.003, sp = 0.05, h = 1e-7;
    const double dn_da = (estimate_emitter_number(a + h, p).n - estimate_emitter_number(a - h, p).n) / (2 * h);
    const double dn_dp = (estimate_emitter_number(a, p + h).n - estimate_emitter_number(a, p - h).n) / (2 * h);
    CHECK(estimate_emitter_number(a, p, sa, sp).sigma == doctest::Approx(std::hypot(dn_da * sa, dn_dp * sp)).epsilon(1e-6));
    CHECK_THROWS_AS(estimate_emitter_number(0.0, 0.5), InvalidArgument);
    CHECK_THROWS_AS(estimate_emitter_number(0.1, 0.0), InvalidArgument);
}

TEST_CASE("thermal bunching limit") {
    CHECK(thermal_bunching_limit(1.0) == 0.0);
    CHECK(thermal_bunching_limit(2.0) == doctest::Approx(1.0));
    CHECK(thermal_bunching_limit(15.0) == doctest::Approx(1.8666667).epsilon(1e-6));
    CHECK(thermal_bunching_limit(1e12) == doctest::Approx(2.0));
    CHECK_THROWS_AS(thermal_bunching_limit(0.5), InvalidArgument);
}

TEST_CASE("saturation lifetime fit") {
    auto lifetime = [](double tau0, double s, double I) { return tau0 / (1.0 + s * I * tau0); };
    SUBCASE("noiseless recovery") {
        std::vector<LifetimeRecord> recs;
        for (double I : {0.5, 1.0, 2.0, 4.0, 8.0}) recs.push_back({I, lifetime(7.6, 0.02, I)});
        const auto fit = fit_saturation_lifetime(recs);
        CHECK(fit.tau0 == doctest::Approx(7.6).epsilon(1e-8));
        CHECK(fit.sigma == doctest::Approx(0.02).epsilon(1e-7));
    }
    SUBCASE("zero-intensity datum equals tau0") {
        std::vector<LifetimeRecord> recs;
        for (double I : {0.0, 1.0, 3.0}) recs.push_back({I, lifetime(15.8, 0.01, I)});
        CHECK(fit_saturation_lifetime(recs).tau0 == doctest::Approx(recs[0].tau1).epsilon(1e-8));
    }
    SUBCASE("noisy confocal set") {
        std::mt19937_64 rng(17);
        std::vector<LifetimeRecord> recs;
        const int photons = 4000;
        for (double I : {0.2, 0.5, 1.0, 2.0, 4.0, 6.0}) {
            // Maximum-likelihood lifetime from exponentially distributed arrival times.
            std::exponential_distribution<double> arrival(1.0 / lifetime(15.8, 0.01, I));
            double sum = 0.0;
            for (int k = 0; k < photons; ++k) sum += arrival(rng);
            const double est = sum / photons;
            recs.push_back({I, est, est / std::sqrt(static_cast<double>(photons))});
        }
        const auto fit = fit_saturation_lifetime(recs);
        CHECK(std::abs(fit.tau0 - 15.8) <= 2.0 * fit.tau0_error);
        CHECK(std::abs(fit.sigma - 0.01) <= 2.0 * fit.sigma_error);
    }
    SUBCASE("degenerate input") {
        std::vector<LifetimeRecord> recs{{1.0, 7.0}, {1.0, 7.1}, {2.0, 6.0}};
        CHECK_THROWS_AS(fit_saturation_lifetime(recs), InvalidArgument);
        recs = {{1.0, 7.0, 0.1}, {1.5, 7.1}, {2.0, 6.0, 0.1}};
        CHECK_THROWS_AS(fit_saturation_lifetime(recs), InvalidArgument);
    }
}

TEST_CASE("Purcell factors") {
    CHECK(purcell_factor(7.6, 7.6, 1.0).effective == 0.0);
    const auto f = purcell_factor(15.8, 7.6, 0.03);
    CHECK(f.effective == doctest::Approx(1.0789).epsilon(1e-4));
    CHECK(f.ideal == doctest::Approx(36.0).epsilon(0.01));
    CHECK_THROWS_AS(purcell_factor(15.8, 7.6, 0.0), InvalidArgument);
    CHECK_THROWS_AS(purcell_factor(-1.0, 7.6, 0.5), InvalidArgument);
}

TEST_CASE("power-law exponent") {
    auto sweep = [](double c, double k, Channel ch) {
        std::vector<PowerSweepRecord> r;
        for (double p = 10.0; p <= 1000.0; p *= 1.5) r.push_back({p, c * std::pow(p, k), ch});
        return r;
    };
    CHECK(fit_power_law(sweep(3.0, 1.0, Channel::psb)).exponent == doctest::Approx(1.0).epsilon(1e-12));
    const auto zpl = sweep(0.7, 1.42, Channel::zpl);
    const auto fit = fit_power_law(zpl);
    CHECK(fit.exponent == doctest::Approx(1.42).epsilon(1e-12));
    CHECK(fit.channel == Channel::zpl);

    SUBCASE("unit rescaling leaves the slope unchanged") {
        std::mt19937_64 rng(9);
        auto noisy = zpl;
        std::normal_distribution<double> n01;
        for (auto& r : noisy) r.rate *= std::exp(0.05 * n01(rng));
        auto rescaled = noisy;
        for (auto& r : rescaled) {
            r.power *= 1e-3;
            r.rate *= 60.0;
        }
        CHECK(fit_power_law(rescaled).exponent == doctest::Approx(fit_power_law(noisy).exponent).epsilon(1e-12));
        CHECK(fit_power_law(rescaled).exponent_error == doctest::Approx(fit_power_law(noisy).exponent_error).epsilon(1e-9));
    }
    SUBCASE("range selection") {
        PowerLawOptions o;
        o.power_min = 50.0;
        o.power_max = 300.0;
        auto mixed = zpl;
        mixed.push_back({5000.0, 1.0, Channel::zpl});
        CHECK(fit_power_law(mixed, o).exponent == doctest::Approx(1.42).epsilon(1e-12));
    }
    SUBCASE("invalid records") {
        auto bad = zpl;
        bad[2].rate = 0.0;
        CHECK_THROWS_AS(fit_power_law(bad), InvalidArgument);
        auto mixed = zpl;
        mixed[1].channel = Channel::psb;
        CHECK_THROWS_AS(fit_power_law(mixed), InvalidArgument);
        CHECK_THROWS_AS(fit_power_law(std::span(zpl).first(2)), InvalidArgument);
    }
    CHECK(channel_from_string("zpl") == Channel::zpl);
    CHECK(to_string(channel_from_string("PSB")) == "PSB");
    CHECK_THROWS_AS(channel_from_string("laser"), InvalidArgument);
}

TEST_CASE("collective model curve fits super-linear") {
    std::vector<double> eta;
    for (int i = 0; i <= 30; ++i) eta.push_back(defaults::gamma * std::pow(10.0, -2.0 + 4.0 * i / 30.0));
    const RateSet rates(defaults::gamma, defaults::identical_model_chi, defaults::identical_model_eta);
    const auto curve = dicke::pump_scaling_curve(40, defaults::identical_model_Gamma, rates, eta);
    std::vector<PowerSweepRecord> window;
    for (const auto& p : curve)
        if (p.local_slope > 1.05) window.push_back({p.eta, p.radiation, Channel::zpl});
    REQUIRE(window.size() >= 3);
    CHECK(fit_power_law(window).exponent > 1.0);
}

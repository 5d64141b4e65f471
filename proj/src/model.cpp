#include "dickecav/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dickecav/error.hpp"

namespace dickecav {

namespace {

void require_finite_nonnegative(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
        throw InvalidArgument(std::string(name) + " must be finite and >= 0, got " + std::to_string(v));
}

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite");
}

double normal_cdf(double x, double mu, double sigma) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

} // namespace

double gaussian_sigma_from_fwhm(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

RateSet::RateSet(double gamma_, double chi_, double eta_) : gamma(gamma_), chi(chi_), eta(eta_) {
    require_finite_nonnegative(gamma, "gamma");
    require_finite_nonnegative(chi, "chi");
    require_finite_nonnegative(eta, "eta");
    if (gamma <= 0.0) throw InvalidArgument("gamma must be > 0 (decay-free emitters are not supported)");
}

CavityParams::CavityParams(double omega_c_, double kappa_, int n_max_)
    : omega_c(omega_c_), kappa(kappa_), n_max(n_max_) {
    require_finite(omega_c, "omega_c");
    require_finite_nonnegative(kappa, "kappa");
    if (kappa <= 0.0) throw InvalidArgument("kappa must be > 0");
    if (n_max < 1) throw InvalidArgument("Fock truncation n_max must be >= 1");
}

SubEnsemble::SubEnsemble(int count_, double omega_, double g_, RateSet rates_)
    : count(count_), omega(omega_), g(g_), rates(rates_) {
    if (count < 1) throw InvalidArgument("sub-ensemble count must be >= 1");
    require_finite(omega, "omega");
    require_finite_nonnegative(g, "g");
}

EmitterEnsembleSpec::EmitterEnsembleSpec(std::vector<SubEnsemble> subs, CavityParams cav)
    : sub_ensembles(std::move(subs)), cavity(cav) {
    if (sub_ensembles.empty()) throw InvalidArgument("ensemble needs at least one sub-ensemble");
}

int EmitterEnsembleSpec::total_count() const {
    return std::accumulate(sub_ensembles.begin(), sub_ensembles.end(), 0,
                           [](int acc, const SubEnsemble& s) { return acc + s.count; });
}

const SubEnsemble& EmitterEnsembleSpec::single() const {
    if (!identical())
        throw InvalidArgument("identical-emitter solver requires exactly one sub-ensemble, got " +
                              std::to_string(sub_ensembles.size()));
    return sub_ensembles.front();
}

GaussianDistributionSpec::GaussianDistributionSpec(double mu_, double fwhm_, int n_bins_, double span_)
    : mu(mu_), fwhm(fwhm_), n_bins(n_bins_), span(span_) {
    require_finite(mu, "mu");
    if (!std::isfinite(fwhm) || fwhm <= 0.0) throw InvalidArgument("Gaussian fwhm must be > 0");
    if (n_bins < 1) throw InvalidArgument("n_bins must be >= 1");
    if (!std::isfinite(span) || span <= 0.0) throw InvalidArgument("span must be > 0");
}

std::vector<int> largest_remainder(const std::vector<double>& quotas, int total) {
    std::vector<int> seats(quotas.size());
    std::vector<std::size_t> order(quotas.size());
    int assigned = 0;
    for (std::size_t i = 0; i < quotas.size(); ++i) {
        seats[i] = static_cast<int>(std::floor(quotas[i]));
        assigned += seats[i];
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return quotas[a] - std::floor(quotas[a]) > quotas[b] - std::floor(quotas[b]);
    });
    for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) ++seats[order[k]];
    return seats;
}

EmitterEnsembleSpec discretize_gaussian(const GaussianDistributionSpec& dist,
                                        int total_count,
                                        double g,
                                        const RateSet& rates,
                                        const CavityParams& cavity) {
    if (total_count < 1) throw InvalidArgument("total_count must be >= 1");
    const int n = dist.n_bins;
    if (n == 1) return EmitterEnsembleSpec({SubEnsemble(total_count, dist.mu, g, rates)}, cavity);

    const double lo = dist.mu - dist.span * dist.fwhm;
    const double hi = dist.mu + dist.span * dist.fwhm;
    const double width = (hi - lo) / n;
    const double sigma = dist.sigma();
    const double mass = normal_cdf(hi, dist.mu, sigma) - normal_cdf(lo, dist.mu, sigma);

    std::vector<double> quotas(n);
    for (int i = 0; i < n; ++i) {
        const double a = lo + i * width;
        quotas[i] = total_count * (normal_cdf(a + width, dist.mu, sigma) - normal_cdf(a, dist.mu, sigma)) / mass;
    }
    if (*std::max_element(quotas.begin(), quotas.end()) < 0.5)
        throw InvalidArgument("n_bins=" + std::to_string(n) + " too large: every bin rounds to zero emitters");

    const auto counts = largest_remainder(quotas, total_count);
    std::vector<SubEnsemble> subs;
    for (int i = 0; i < n; ++i)
        if (counts[i] > 0) subs.emplace_back(counts[i], lo + (i + 0.5) * width, g, rates);
    return EmitterEnsembleSpec(std::move(subs), cavity);
}

namespace {

double lorentz_denominator(const SubEnsemble& e, const CavityParams& c, GammaDressing dressing) {
    const double detuning = c.omega_c - e.omega;
    const double eta = dressing == GammaDressing::pump_dressed ? e.rates.eta : 0.0;
    const double half_width = 0.5 * (c.kappa + eta + e.rates.gamma) + e.rates.chi;
    return detuning * detuning + half_width * half_width;
}

} // namespace

EffectiveCoupling effective_coupling(const SubEnsemble& emitters, const CavityParams& cavity, GammaDressing dressing) {
    const double denom = lorentz_denominator(emitters, cavity, dressing);
    const double g2 = emitters.g * emitters.g;
    return {g2 * cavity.kappa / denom, 2.0 * g2 * (cavity.omega_c - emitters.omega) / denom};
}

EffectiveCoupling effective_coupling(const EmitterEnsembleSpec& spec, GammaDressing dressing) {
    return effective_coupling(spec.single(), spec.cavity, dressing);
}

double coupling_for_gamma(double Gamma, const SubEnsemble& emitters, const CavityParams& cavity, GammaDressing dressing) {
    require_finite_nonnegative(Gamma, "Gamma");
    return std::sqrt(Gamma * lorentz_denominator(emitters, cavity, dressing) / cavity.kappa);
}

} // namespace dickecav

// model.hpp: physical parameter types, unit conventions and ensemble discretization
//
// Internal units: time in ns, angular frequencies in rad/ns, rates in 1/ns.
// Linewidths quoted as FWHM in GHz are converted once at the boundary with
// `rate_from_ghz_fwhm`.

#pragma once

#include <numbers>
#include <vector>

namespace dickecav {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// FWHM linewidth in GHz -> angular rate in rad/ns (or energy-decay rate in 1/ns).
constexpr double rate_from_ghz_fwhm(double ghz) { return two_pi * ghz; }
constexpr double ghz_fwhm_from_rate(double rate) { return rate / two_pi; }

// w = 2 sqrt(2 ln 2) sigma
double gaussian_sigma_from_fwhm(double fwhm);

struct RateSet {
    double gamma; // individual decay, 1/ns
    double chi;   // pure dephasing, 1/ns
    double eta;   // incoherent pump, 1/ns

    RateSet(double gamma_, double chi_, double eta_);
};

struct CavityParams {
    double omega_c; // rad/ns
    double kappa;   // photon loss, 1/ns
    int n_max;      // Fock truncation, oracle only

    CavityParams(double omega_c_, double kappa_, int n_max_ = 5);
};

struct SubEnsemble {
    int count;    // N_k
    double omega; // rad/ns
    double g;     // rad/ns
    RateSet rates;

    SubEnsemble(int count_, double omega_, double g_, RateSet rates_);
};

struct EmitterEnsembleSpec {
    std::vector<SubEnsemble> sub_ensembles;
    CavityParams cavity;

    EmitterEnsembleSpec(std::vector<SubEnsemble> subs, CavityParams cav);

    int total_count() const;
    bool identical() const { return sub_ensembles.size() == 1; }
    const SubEnsemble& single() const; // throws unless identical()
};

struct GaussianDistributionSpec {
    double mu;   // mean angular frequency, rad/ns
    double fwhm; // rad/ns
    int n_bins = 21;
    double span = 2.5; // half-width of the sampled range in units of fwhm

    GaussianDistributionSpec(double mu_, double fwhm_, int n_bins_ = 21, double span_ = 2.5);
    double sigma() const { return gaussian_sigma_from_fwhm(fwhm); }
};

// Splits `total_count` emitters into `dist.n_bins` equal-width frequency cells
// over mu +/- span*fwhm. Quotas are the truncated-Gaussian probability mass of
// each cell; integers come from largest-remainder apportionment. Empty cells
// are dropped. Throws if every quota is below one half.
EmitterEnsembleSpec discretize_gaussian(const GaussianDistributionSpec& dist,
                                        int total_count,
                                        double g,
                                        const RateSet& rates,
                                        const CavityParams& cavity);

// Integer apportionment of `total` seats by largest remainder. Ties are broken
// towards the lower index.
std::vector<int> largest_remainder(const std::vector<double>& quotas, int total);

// Whether the pump rate enters the Lorentzian width of the eliminated cavity.
enum class GammaDressing { pump_dressed, bare };

struct EffectiveCoupling {
    double Gamma;       // collective (Purcell) decay rate, 1/ns
    double delta_omega; // cavity-induced frequency shift, rad/ns
};

// Adiabatic elimination of the cavity for a single sub-ensemble:
//   D     = (omega_c - omega_0)^2 + ((kappa + eta + gamma)/2 + chi)^2
//   Gamma = g^2 kappa / D,   delta_omega = 2 g^2 (omega_c - omega_0) / D
EffectiveCoupling effective_coupling(const SubEnsemble& emitters,
                                     const CavityParams& cavity,
                                     GammaDressing dressing = GammaDressing::pump_dressed);
EffectiveCoupling effective_coupling(const EmitterEnsembleSpec& spec,
                                     GammaDressing dressing = GammaDressing::pump_dressed);

// Coupling g that yields collective rate `Gamma` under the given conditions.
double coupling_for_gamma(double Gamma, const SubEnsemble& emitters_without_g, const CavityParams& cavity,
                          GammaDressing dressing = GammaDressing::pump_dressed);

namespace defaults {
// Free-space excited-state lifetime 15.8 ns.
inline constexpr double tau0_ns = 15.8;
inline constexpr double gamma = 1.0 / tau0_ns;
// Cavity linewidth 1.0 GHz.
inline constexpr double cavity_linewidth_ghz = 1.0;
inline constexpr double kappa = rate_from_ghz_fwhm(cavity_linewidth_ghz);
// Inhomogeneous ZPL linewidth 300 GHz.
inline constexpr double inhomogeneous_linewidth_ghz = 300.0;
// Collective rate of the identical-emitter model: 1/(8 Gamma) = 0.33 ns at eta = 2 gamma.
inline constexpr double identical_model_Gamma = 1.0 / (8.0 * 0.33);
// Pure dephasing of the identical-emitter model, fixed so that N = 40 at eta = 2 gamma
// gives a 0.23 ns bunching decay and a 1.37 ns antibunching recovery.
inline constexpr double identical_model_chi = 0.43;
inline constexpr double identical_model_eta = 2.0 * gamma;
inline constexpr int gaussian_bins = 21;
inline constexpr double gaussian_span = 2.5;
} // namespace defaults

} // namespace dickecav

// meanfield.hpp: second-order cumulant steady state of inhomogeneous sub-ensembles in a cavity
//
// One representative emitter per sub-ensemble k carries
//   s_k = <sigma_z>,  x_k = <sigma+_k a>,  C_kk' = <sigma+_ki sigma-_k'i'> (i != i'),
// and the cavity carries n = <a+ a>. Frame rotating at omega_c; <a> = <sigma-> = 0
// by phase invariance. Steady-state closure (third moments factorized):
//   n   = -(2/kappa) sum_k N_k g_k Im x_k
//   s_k = (4 g_k Im x_k + eta_k - gamma_k) / (gamma_k + eta_k)
//   C_kk' = (g_k s_k conj(x_k') - g_k' s_k' x_k) / (conj(w_k) - w_k')
//   (conj(w_k) - w_c) x_k = g_k s_k n + g_k (1 + s_k)/2
//                         + sum_k' N_k' g_k' C_kk' - g_k C_kk
// with complex frequencies w_k (see ComplexFrequency) and w_c = omega_c - i kappa/2.
// The last term removes the emitter itself from its own sub-ensemble.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dickecav/model.hpp"

namespace dickecav::meanfield {

// half_width: w_k = omega_k - i((gamma_k + eta_k)/2 + chi_k), the decay rate of <sigma->.
// literal:    w_k = omega_k - i(gamma_k + eta_k) + chi_k, as typeset in the source model.
enum class ComplexFrequency { half_width, literal };

std::complex<double> emitter_frequency(const SubEnsemble& e, ComplexFrequency convention);

struct CumulantState {
    std::vector<double> sigma_z;                  // per sub-ensemble
    std::vector<std::complex<double>> sigma_plus_a; // <sigma+_k a>
    Eigen::MatrixXcd pair;                        // C_kk'
    double photon_number = 0.0;

    // |s_k| <= 1, n >= 0, C Hermitian, real within a sub-ensemble and bounded by
    // sqrt(p_k p_k') with p = (1 + s)/2, all within tol.
    bool is_physical(double tol = 1e-9) const;
};

struct MeanfieldOptions {
    ComplexFrequency frequency = ComplexFrequency::half_width;
    double damping = 0.5;     // x <- (1 - damping) x + damping Phi(x)
    double tolerance = 1e-10; // successive-iterate max norm, relative to max(1, |x|)
    int max_picard = 400;
    int stall_window = 25;    // Picard is abandoned when the residual fails to halve over this many steps
    int max_newton_evals = 20000;
    double photon_cap = 1e12; // iterates beyond this count as divergent
    // Root selection: relaxation of the time-dependent closure from the ground state.
    double relax_time = 4000.0;     // ns
    double relax_chunk = 50.0;      // ns between residual checks
    double relax_match = 1e-4;      // relative map residual that ends the relaxation
    double relax_agreement = 1e-2;  // the direct root is kept when this close to the relaxed state
};

struct MeanfieldSolution {
    CumulantState state;
    double radiation_rate = 0.0; // kappa <a+ a>, photons/ns
    double residual = 0.0;       // |Phi(x) - x|_inf at the returned x
    int iterations = 0;          // Picard steps plus Newton function evaluations
    bool used_newton = false;
    bool stable = true;          // false when the time-dependent closure does not settle on this root
};

// The direct route (damped Picard from x = 0, Newton on stall) is kept when it
// lands on the state reached by relaxation or the relaxation never settles;
// otherwise Newton starts from the relaxed state. Throws ConvergenceError (history: residual per iterate) when
// no physical root is found.
MeanfieldSolution solve_cumulant_steady_state(const EmitterEnsembleSpec& spec, const MeanfieldOptions& opts = {});

// Fixed parameters of a Gaussian-ensemble pump sweep. eta inside `rates` is ignored.
struct SweepParams {
    int total_count = 500;
    double g = 0.9; // rad/ns
    RateSet rates{defaults::gamma, defaults::identical_model_chi, defaults::identical_model_eta};
    CavityParams cavity{0.0, defaults::kappa};
    int n_bins = defaults::gaussian_bins; // lower bound, see max_bin_width
    double span = defaults::gaussian_span;
    double max_bin_width = 1.0;           // cell width cap in units of kappa
    MeanfieldOptions solver{};
};

// Ensemble at center detuning delta = mu - omega_c and FWHM w; w = 0 is the identical limit.
EmitterEnsembleSpec gaussian_ensemble(const SweepParams& p, double w, double delta, double eta);

struct PumpCurve {
    double w = 0.0;     // rad/ns
    double delta = 0.0; // rad/ns
    bool weighted = false;
    std::vector<double> eta;
    std::vector<double> radiation; // photons/ns
    std::vector<double> slopes;    // d ln I / d ln eta
    double max_slope = 0.0;
};

PumpCurve pump_curve(const SweepParams& p, double w, double delta, std::span<const double> eta_grid);

// One pump curve per width, all resonant.
std::vector<PumpCurve> inhomogeneity_sweep(const SweepParams& p, std::span<const double> w_list,
                                           std::span<const double> eta_grid);

struct DetuningSweep {
    std::vector<PumpCurve> curves; // one per delta
    PumpCurve averaged;            // Gaussian-weighted over delta, weights normalized on the grid
};

// delta_grid must be symmetric about zero.
DetuningSweep detuning_sweep_and_average(const SweepParams& p, double w, std::span<const double> delta_grid,
                                         std::span<const double> eta_grid,
                                         double weight_fwhm = rate_from_ghz_fwhm(defaults::inhomogeneous_linewidth_ghz));

struct EffectiveDephasing {
    double chi;      // 1/ns
    double rms_log;  // rms of ln I_identical - ln I_gaussian over the grid
};

// Dephasing of the identical ensemble (same count and g) whose radiation curve
// best matches the width-w ensemble in log space; searched over [chi_lo, chi_hi].
EffectiveDephasing effective_dephasing(const SweepParams& p, double w, std::span<const double> eta_grid,
                                       double chi_lo = 1e-3, double chi_hi = 1e3);

} // namespace dickecav::meanfield

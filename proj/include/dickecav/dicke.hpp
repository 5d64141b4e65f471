// dicke.hpp: permutation-invariant master equation in the collective |J,M> basis
//
// The state of N identical emitters is stored as one (2J+1)x(2J+1) block per
// collective spin J. Each block holds manifold-summed matrix elements: the
// degenerate copies of a J multiplet are traced out, so the populations of a
// block sum to the total weight of that J sector. Half-integer quantum
// numbers are carried as doubled integers (two_j = 2J, two_m = 2M).

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dickecav/model.hpp"
#include "dickecav/ode.hpp"

namespace dickecav::dicke {

inline constexpr int default_max_emitters = 100;

struct Level {
    int two_j;
    int two_m;
    double j() const { return 0.5 * two_j; }
    double m() const { return 0.5 * two_m; }
};

// A^-_{J,M} = sqrt((J+M)(J-M+1)). Throws if |M| > J or the parities differ.
double a_minus_coefficient(double j, double m);
double a_minus_squared(int two_j, int two_m);

class DickeBasis {
public:
    explicit DickeBasis(int n_emitters, int max_emitters = default_max_emitters);

    int n_emitters() const { return n_; }
    // Blocks are ordered J = N/2, N/2-1, ..., 0 or 1/2.
    int block_count() const { return static_cast<int>(two_j_.size()); }
    int two_j(int block) const { return two_j_[block]; }
    int block_dim(int block) const { return two_j_[block] + 1; }
    int block_of(int two_j) const; // -1 if J is not present

    std::size_t population_offset(int block) const { return pop_offset_[block]; }
    std::size_t block_offset(int block) const { return vec_offset_[block]; }
    std::size_t population_size() const { return pop_offset_.back(); }
    std::size_t vector_size() const { return vec_offset_.back(); }

    // Every (J,M), block by block, M ascending within a block.
    const std::vector<Level>& levels() const { return levels_; }

    // ln of the number of degenerate J multiplets of N spins-1/2.
    static double log_multiplicity(int n, int two_j);

private:
    int n_;
    std::vector<int> two_j_;
    std::vector<std::size_t> pop_offset_;
    std::vector<std::size_t> vec_offset_;
    std::vector<Level> levels_;
};

// Row/column index of M inside a block of spin J.
inline int m_index(int two_j, int two_m) { return (two_m + two_j) / 2; }

class DickeBlockState {
public:
    explicit DickeBlockState(DickeBasis basis);

    static DickeBlockState ground(const DickeBasis& basis);        // |N/2, -N/2>
    static DickeBlockState fully_excited(const DickeBasis& basis); // |N/2, +N/2>
    static DickeBlockState from_populations(const DickeBasis& basis, std::span<const double> p);
    static DickeBlockState from_vector(const DickeBasis& basis, std::span<const std::complex<double>> v);

    const DickeBasis& basis() const { return basis_; }
    const Eigen::MatrixXcd& block(int b) const { return blocks_[b]; }
    Eigen::MatrixXcd& block(int b) { return blocks_[b]; }

    double population(int two_j, int two_m) const;
    std::vector<double> populations() const;
    Eigen::VectorXcd to_vector() const;

    std::complex<double> trace() const;
    bool has_coherences(double tol = 0.0) const;
    // Hermitian blocks, unit trace, diagonals >= -tol.
    bool is_valid(double tol = 1e-10) const;
    // Expectation value of J+J- (sum of A^2 weighted populations).
    double jplus_jminus() const;
    // J- rho J+ applied block-wise (not trace normalized).
    DickeBlockState lowered() const;

private:
    DickeBasis basis_;
    std::vector<Eigen::MatrixXcd> blocks_;
};

// 0.5 * || rho - sigma ||_1 for block-diagonal states.
double trace_distance(const DickeBlockState& a, const DickeBlockState& b);

struct CollectiveRates {
    double Gamma = 0.0;       // collective decay via the eliminated cavity
    double gamma = 0.0;       // individual decay
    double chi = 0.0;         // individual dephasing (D[sigma_z] weight chi/2)
    double eta = 0.0;         // individual pump
    double delta_omega = 0.0; // collective frequency shift (rotating frame of the bare emitter)
};

struct LiouvillianOptions {
    int max_emitters = default_max_emitters;
};

class DickeLiouvillian {
public:
    DickeLiouvillian(DickeBasis basis, CollectiveRates rates);

    const DickeBasis& basis() const { return basis_; }
    const CollectiveRates& rates() const { return rates_; }
    // Acts on DickeBlockState::to_vector() layout.
    const Eigen::SparseMatrix<std::complex<double>>& generator() const { return full_; }
    // Restriction to diagonal elements (the M = M' sector is invariant).
    const Eigen::SparseMatrix<double>& population_generator() const { return populations_; }

    DickeBlockState apply(const DickeBlockState& rho) const;
    // Max absolute column sum of the full generator.
    double norm() const;

private:
    DickeBasis basis_;
    CollectiveRates rates_;
    Eigen::SparseMatrix<std::complex<double>> full_;
    Eigen::SparseMatrix<double> populations_;
};

DickeLiouvillian build_liouvillian(int n_emitters, double Gamma, const RateSet& rates, double delta_omega = 0.0,
                                   const LiouvillianOptions& opts = {});
DickeLiouvillian build_liouvillian(int n_emitters, const CollectiveRates& rates, const LiouvillianOptions& opts = {});

struct SteadyStateOptions {
    double residual_tol = 1e-10; // relative to ||L||
    double fallback_time = 2000.0; // ns of relaxation when the direct solve misses tolerance
};

struct SteadyStateResult {
    DickeBlockState state;
    double residual; // ||L rho|| / ||L||
};

// Unique steady state. Throws NonUniqueSteadyState or ConvergenceError.
SteadyStateResult steady_state_with_residual(const DickeLiouvillian& L, const SteadyStateOptions& opts = {});
DickeBlockState steady_state(const DickeLiouvillian& L, const SteadyStateOptions& opts = {});

// Propagates rho0 to each time in t_grid (t_grid[0] is the start time).
// States without coherences are propagated in the population sector only.
std::vector<DickeBlockState> evolve(const DickeLiouvillian& L, const DickeBlockState& rho0,
                                    std::span<const double> t_grid, const ode::Options& opts = {});

// Population-sector propagation for (possibly unnormalized) diagonal vectors.
std::vector<Eigen::VectorXd> evolve_populations(const DickeLiouvillian& L, const Eigen::VectorXd& p0,
                                                std::span<const double> t_grid, const ode::Options& opts = {});

// I_rad = Gamma * sum_{J,M} (J+M)(J-M+1) rho^J_MM, photons/ns.
double radiation_rate(const DickeBlockState& rho, double Gamma);

struct PumpPoint {
    double eta_over_gamma;
    double eta;
    double Gamma;
    double radiation;
    double local_slope; // d ln I / d ln eta
};

// Steady-state radiation for each pump rate with a fixed collective rate.
std::vector<PumpPoint> pump_scaling_curve(int n_emitters, double Gamma, const RateSet& rates,
                                          std::span<const double> eta_grid);
// Same, but Gamma and delta_omega follow the eliminated-cavity formulas at every pump rate.
std::vector<PumpPoint> pump_scaling_curve(int n_emitters, const SubEnsemble& emitters, const CavityParams& cavity,
                                          std::span<const double> eta_grid, GammaDressing dressing);

// Log-log derivative on a non-uniform grid (second-order centred in the
// interior, one-sided at the ends).
std::vector<double> log_log_slopes(std::span<const double> x, std::span<const double> y);

} // namespace dickecav::dicke

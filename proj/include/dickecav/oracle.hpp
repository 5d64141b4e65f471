// oracle.hpp: brute-force Lindblad solver over distinguishable emitters (+ cavity Fock space)
//
// Reference implementation for the Dicke engine, the cavity elimination and
// the mean-field solver at small N. Everything is built from explicit
// Kronecker products; nothing here assumes permutation symmetry.
//
// Tensor order: emitter 0, ..., emitter N-1, then the cavity. Single emitter
// basis: index 0 = ground, 1 = excited. Frame: rotating at omega_c.

#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dickecav/dicke.hpp"
#include "dickecav/model.hpp"
#include "dickecav/ode.hpp"

namespace dickecav::oracle {

using SparseC = Eigen::SparseMatrix<std::complex<double>>;
using DenseState = Eigen::MatrixXcd;

struct CollapseChannel {
    SparseC op;
    double rate; // enters as rate * (A rho A^+ - 1/2 {A^+ A, rho})
    std::string label;
};

struct OracleOptions {
    long max_hilbert_dim = 1L << 14;
};

class FockLindbladSystem {
public:
    FockLindbladSystem(EmitterEnsembleSpec spec, bool include_cavity, const OracleOptions& opts = {});

    const EmitterEnsembleSpec& spec() const { return spec_; }
    bool include_cavity() const { return include_cavity_; }
    int n_emitters() const { return n_emitters_; }
    int fock_dim() const { return fock_dim_; } // 1 without cavity
    long hilbert_dim() const { return dim_; }
    const SparseC& hamiltonian() const { return hamiltonian_; }
    const std::vector<CollapseChannel>& channels() const { return channels_; }
    const OracleOptions& options() const { return opts_; }

    // Operators on the full Hilbert space.
    SparseC sigma_minus(int emitter) const;
    SparseC sigma_plus(int emitter) const;
    SparseC sigma_z(int emitter) const;
    SparseC annihilation() const; // throws without cavity
    SparseC collective_lowering() const;
    SparseC identity() const;

    // Value-semantics extension points (e.g. an externally added collective channel).
    FockLindbladSystem with_channel(SparseC op, double rate, std::string label) const;
    FockLindbladSystem with_hamiltonian(const SparseC& extra) const;

    // True once channels or Hamiltonian terms were added after construction.
    bool extended() const { return extended_; }

    // Column-stacked superoperator: vec(L rho).
    const SparseC& liouvillian() const { return liouvillian_; }

private:
    friend FockLindbladSystem build_collective_system(int, const dicke::CollectiveRates&, const OracleOptions&);
    void assemble_liouvillian();

    EmitterEnsembleSpec spec_;
    bool include_cavity_;
    OracleOptions opts_;
    int n_emitters_;
    int fock_dim_;
    long dim_;
    bool extended_ = false;
    std::vector<int> emitter_group_; // sub-ensemble index of every emitter
    SparseC hamiltonian_;
    std::vector<CollapseChannel> channels_;
    SparseC liouvillian_;
};

// Assembles H_tls + H_c + H_tls-c (rotating at omega_c) and the loss, decay,
// pump and dephasing channels.
FockLindbladSystem build_full_system(const EmitterEnsembleSpec& spec, bool include_cavity,
                                     const OracleOptions& opts = {});

// Identical emitters, no cavity, with the eliminated-cavity collective channel
// Gamma D[sum sigma^-] and shift (delta_omega/2) sum sigma_z added.
FockLindbladSystem build_collective_system(int n_emitters, const dicke::CollectiveRates& rates,
                                           const OracleOptions& opts = {});

Eigen::VectorXcd vectorize(const DenseState& rho);
DenseState unvectorize(const Eigen::VectorXcd& v, long dim);

std::vector<DenseState> oracle_evolve(const FockLindbladSystem& system, const DenseState& rho0,
                                      std::span<const double> t_grid, const ode::Options& opts = {});

struct OracleSteadyOptions {
    double residual_tol = 1e-10;
    bool auto_truncation = true;        // double n_max until the top Fock level is empty
    double top_population_tol = 1e-6;
    int max_n_max = 80;
};

struct OracleSteadyState {
    DenseState state;
    FockLindbladSystem system; // possibly re-truncated
    double residual;
};

OracleSteadyState oracle_steady_state_ex(const FockLindbladSystem& system, const OracleSteadyOptions& opts = {});
DenseState oracle_steady_state(const FockLindbladSystem& system, const OracleSteadyOptions& opts = {});

// tr{O e^{L tau}(A rho A^+)} on every grid time (quantum regression).
std::vector<std::complex<double>> regression(const FockLindbladSystem& system, const DenseState& rho,
                                             const SparseC& jump, const SparseC& observable,
                                             std::span<const double> tau_grid, const ode::Options& opts = {});

std::complex<double> expectation(const DenseState& rho, const SparseC& op);
double population_of_top_fock_level(const FockLindbladSystem& system, const DenseState& rho);
DenseState partial_trace_cavity(const FockLindbladSystem& system, const DenseState& rho);
DenseState ground_state(const FockLindbladSystem& system);
double min_eigenvalue(const DenseState& rho);
double dense_trace_distance(const DenseState& a, const DenseState& b);

// Explicit |J,M,alpha> vectors of N spins in the product basis.
class ProductDickeBasis {
public:
    explicit ProductDickeBasis(int n_emitters);
    int n_emitters() const { return n_; }
    const dicke::DickeBasis& dicke_basis() const { return basis_; }
    // Columns ordered by M ascending, one matrix per multiplet copy alpha.
    const std::vector<Eigen::MatrixXcd>& multiplets(int block) const { return multiplets_[block]; }

private:
    int n_;
    dicke::DickeBasis basis_;
    std::vector<std::vector<Eigen::MatrixXcd>> multiplets_;
};

// Manifold-summed Dicke blocks of an emitter-only state. Throws if the
// system carries a cavity factor or non-identical emitters.
dicke::DickeBlockState symmetrize_and_project(const DenseState& rho, int n_emitters);
dicke::DickeBlockState symmetrize_and_project(const FockLindbladSystem& system, const DenseState& rho);
// Inverse embedding: sum_J sum_alpha |J,M,alpha> rho~^J_MM' <J,M',alpha| / d_J.
DenseState embed(const dicke::DickeBlockState& rho);

} // namespace dickecav::oracle

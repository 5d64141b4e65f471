#include "dickecav/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <Eigen/SparseQR>
#include <unsupported/Eigen/KroneckerProduct>

#include "dickecav/error.hpp"

namespace dickecav::oracle {

namespace {

using Complex = std::complex<double>;
using Triplet = Eigen::Triplet<Complex>;

SparseC sparse_identity(long n) {
    SparseC id(n, n);
    id.setIdentity();
    return id;
}

SparseC single_site(int which) {
    SparseC m(2, 2);
    switch (which) {
    case 0: m.insert(0, 1) = 1.0; break; // sigma^- : |g><e|
    case 1: m.insert(1, 0) = 1.0; break; // sigma^+
    default:
        m.insert(0, 0) = -1.0;
        m.insert(1, 1) = 1.0;
        break;
    }
    return m;
}

SparseC kron(const SparseC& a, const SparseC& b) {
    SparseC out = Eigen::kroneckerProduct(a, b).eval();
    out.makeCompressed();
    return out;
}

SparseC adjoint(const SparseC& a) { return SparseC(a.adjoint()); }

} // namespace

FockLindbladSystem::FockLindbladSystem(EmitterEnsembleSpec spec, bool include_cavity, const OracleOptions& opts)
    : spec_(std::move(spec)), include_cavity_(include_cavity), opts_(opts) {
    n_emitters_ = spec_.total_count();
    fock_dim_ = include_cavity_ ? spec_.cavity.n_max + 1 : 1;
    if (n_emitters_ > 30) throw DimensionLimit("oracle emitter count too large");
    dim_ = (1L << n_emitters_) * fock_dim_;
    if (dim_ > opts_.max_hilbert_dim)
        throw DimensionLimit("oracle Hilbert dimension " + std::to_string(dim_) + " exceeds cap " +
                             std::to_string(opts_.max_hilbert_dim));
    for (std::size_t k = 0; k < spec_.sub_ensembles.size(); ++k)
        for (int i = 0; i < spec_.sub_ensembles[k].count; ++i) emitter_group_.push_back(static_cast<int>(k));

    const double wc = spec_.cavity.omega_c;
    hamiltonian_ = SparseC(dim_, dim_);
    for (int i = 0; i < n_emitters_; ++i) {
        const auto& e = spec_.sub_ensembles[emitter_group_[i]];
        hamiltonian_ += (0.5 * (e.omega - wc)) * sigma_z(i);
        if (include_cavity_ && e.g != 0.0) {
            const SparseC a = annihilation();
            const SparseC sp_a = sigma_plus(i) * a;
            hamiltonian_ += e.g * (sp_a + adjoint(sp_a));
        }
    }
    if (include_cavity_) channels_.push_back({annihilation(), spec_.cavity.kappa, "cavity_loss"});
    for (int i = 0; i < n_emitters_; ++i) {
        const auto& r = spec_.sub_ensembles[emitter_group_[i]].rates;
        const auto tag = std::to_string(i);
        if (r.gamma > 0.0) channels_.push_back({sigma_minus(i), r.gamma, "decay_" + tag});
        if (r.eta > 0.0) channels_.push_back({sigma_plus(i), r.eta, "pump_" + tag});
        if (r.chi > 0.0) channels_.push_back({sigma_z(i), 0.5 * r.chi, "dephasing_" + tag});
    }
    assemble_liouvillian();
}

SparseC FockLindbladSystem::identity() const { return sparse_identity(dim_); }

namespace {

SparseC embed_site(const SparseC& op, int site, int n_sites, int fock_dim) {
    SparseC out = sparse_identity(1L << site);
    out = kron(out, op);
    out = kron(out, sparse_identity(1L << (n_sites - site - 1)));
    return kron(out, sparse_identity(fock_dim));
}

} // namespace

SparseC FockLindbladSystem::sigma_minus(int emitter) const {
    return embed_site(single_site(0), emitter, n_emitters_, fock_dim_);
}
SparseC FockLindbladSystem::sigma_plus(int emitter) const {
    return embed_site(single_site(1), emitter, n_emitters_, fock_dim_);
}
SparseC FockLindbladSystem::sigma_z(int emitter) const {
    return embed_site(single_site(2), emitter, n_emitters_, fock_dim_);
}

SparseC FockLindbladSystem::annihilation() const {
    if (!include_cavity_) throw InvalidArgument("system has no cavity mode");
    SparseC a(fock_dim_, fock_dim_);
    for (int n = 1; n < fock_dim_; ++n) a.insert(n - 1, n) = std::sqrt(static_cast<double>(n));
    return kron(sparse_identity(1L << n_emitters_), a);
}

SparseC FockLindbladSystem::collective_lowering() const {
    SparseC j(dim_, dim_);
    for (int i = 0; i < n_emitters_; ++i) j += sigma_minus(i);
    return j;
}

FockLindbladSystem FockLindbladSystem::with_channel(SparseC op, double rate, std::string label) const {
    if (!std::isfinite(rate) || rate < 0.0) throw InvalidArgument("collapse rate must be >= 0");
    FockLindbladSystem copy = *this;
    copy.channels_.push_back({std::move(op), rate, std::move(label)});
    copy.extended_ = true;
    copy.assemble_liouvillian();
    return copy;
}

FockLindbladSystem FockLindbladSystem::with_hamiltonian(const SparseC& extra) const {
    FockLindbladSystem copy = *this;
    copy.hamiltonian_ += extra;
    copy.extended_ = true;
    copy.assemble_liouvillian();
    return copy;
}

void FockLindbladSystem::assemble_liouvillian() {
    const SparseC id = identity();
    const Complex minus_i(0.0, -1.0);
    SparseC hT = SparseC(hamiltonian_.transpose());
    liouvillian_ = minus_i * (kron(id, hamiltonian_) - kron(hT, id));
    for (const auto& ch : channels_) {
        if (ch.rate == 0.0) continue;
        const SparseC ad = adjoint(ch.op);
        const SparseC ada = ad * ch.op;
        const SparseC adaT = SparseC(ada.transpose());
        const SparseC conj_op = SparseC(ch.op.conjugate());
        liouvillian_ += ch.rate * (kron(conj_op, ch.op) - 0.5 * kron(id, ada) - 0.5 * kron(adaT, id));
    }
    liouvillian_.prune(Complex(0.0, 0.0), 1e-300);
    liouvillian_.makeCompressed();
}

FockLindbladSystem build_full_system(const EmitterEnsembleSpec& spec, bool include_cavity, const OracleOptions& opts) {
    return FockLindbladSystem(spec, include_cavity, opts);
}

FockLindbladSystem build_collective_system(int n_emitters, const dicke::CollectiveRates& rates,
                                           const OracleOptions& opts) {
    // omega = omega_c: the emitter-only system is in the emitter frame. The
    // placeholder decay rate is replaced below, so zero individual rates are allowed.
    const CavityParams cavity(0.0, 1.0, 1);
    const SubEnsemble emitters(n_emitters, 0.0, 0.0, RateSet(1.0, 0.0, 0.0));
    FockLindbladSystem sys(EmitterEnsembleSpec({emitters}, cavity), false, opts);
    for (double r : {rates.Gamma, rates.gamma, rates.chi, rates.eta})
        if (!std::isfinite(r) || r < 0.0) throw InvalidArgument("collective system rates must be finite and >= 0");
    sys.channels_.clear();
    SparseC jz(sys.hilbert_dim(), sys.hilbert_dim());
    for (int i = 0; i < n_emitters; ++i) {
        const auto tag = std::to_string(i);
        jz += sys.sigma_z(i);
        if (rates.gamma > 0.0) sys.channels_.push_back({sys.sigma_minus(i), rates.gamma, "decay_" + tag});
        if (rates.eta > 0.0) sys.channels_.push_back({sys.sigma_plus(i), rates.eta, "pump_" + tag});
        if (rates.chi > 0.0) sys.channels_.push_back({sys.sigma_z(i), 0.5 * rates.chi, "dephasing_" + tag});
    }
    if (rates.Gamma > 0.0) sys.channels_.push_back({sys.collective_lowering(), rates.Gamma, "collective_decay"});
    sys.hamiltonian_ = (0.5 * rates.delta_omega) * jz;
    sys.extended_ = true;
    sys.assemble_liouvillian();
    return sys;
}

Eigen::VectorXcd vectorize(const DenseState& rho) {
    return Eigen::Map<const Eigen::VectorXcd>(rho.data(), rho.size());
}

DenseState unvectorize(const Eigen::VectorXcd& v, long dim) { return Eigen::Map<const DenseState>(v.data(), dim, dim); }

namespace {

std::vector<Eigen::VectorXcd> propagate(const SparseC& L, const Eigen::VectorXcd& v0, std::span<const double> t_grid,
                                        const ode::Options& opts) {
    auto rhs = [&L](std::span<const double> x, std::span<double> dx) {
        const auto xc = ode::as_complex(x);
        auto dc = ode::as_complex(dx);
        Eigen::Map<const Eigen::VectorXcd> xv(xc.data(), static_cast<Eigen::Index>(xc.size()));
        Eigen::Map<Eigen::VectorXcd> dv(dc.data(), static_cast<Eigen::Index>(dc.size()));
        dv.noalias() = L * xv;
    };
    const auto* raw = reinterpret_cast<const double*>(v0.data());
    const auto states = ode::integrate(rhs, ode::State(raw, raw + 2 * v0.size()), t_grid, opts);
    std::vector<Eigen::VectorXcd> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        const auto c = ode::as_complex(std::span<const double>(s));
        out.emplace_back(Eigen::Map<const Eigen::VectorXcd>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
    return out;
}

} // namespace

std::vector<DenseState> oracle_evolve(const FockLindbladSystem& system, const DenseState& rho0,
                                      std::span<const double> t_grid, const ode::Options& opts) {
    if (rho0.rows() != system.hilbert_dim() || rho0.cols() != system.hilbert_dim())
        throw InvalidArgument("initial state dimension does not match the system");
    std::vector<DenseState> out;
    for (const auto& v : propagate(system.liouvillian(), vectorize(rho0), t_grid, opts))
        out.push_back(unvectorize(v, system.hilbert_dim()));
    return out;
}

std::complex<double> expectation(const DenseState& rho, const SparseC& op) {
    return (op * rho).trace();
}

double population_of_top_fock_level(const FockLindbladSystem& system, const DenseState& rho) {
    if (!system.include_cavity()) return 0.0;
    const long f = system.fock_dim();
    double p = 0.0;
    for (long e = 0; e < (1L << system.n_emitters()); ++e) p += rho(e * f + f - 1, e * f + f - 1).real();
    return p;
}

DenseState partial_trace_cavity(const FockLindbladSystem& system, const DenseState& rho) {
    const long f = system.fock_dim();
    const long ne = 1L << system.n_emitters();
    DenseState out = DenseState::Zero(ne, ne);
    for (long r = 0; r < ne; ++r)
        for (long c = 0; c < ne; ++c)
            for (long n = 0; n < f; ++n) out(r, c) += rho(r * f + n, c * f + n);
    return out;
}

DenseState ground_state(const FockLindbladSystem& system) {
    DenseState rho = DenseState::Zero(system.hilbert_dim(), system.hilbert_dim());
    rho(0, 0) = 1.0;
    return rho;
}

double min_eigenvalue(const DenseState& rho) {
    const DenseState h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseState> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double dense_trace_distance(const DenseState& a, const DenseState& b) {
    const DenseState d = a - b;
    const DenseState h = 0.5 * (d + d.adjoint());
    Eigen::SelfAdjointEigenSolver<DenseState> es(h, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

namespace {

struct SolvedSteady {
    DenseState state;
    double residual;
};

SolvedSteady solve_steady(const FockLindbladSystem& system, double residual_tol) {
    const SparseC& L = system.liouvillian();
    const long d = system.hilbert_dim();
    const long n = d * d;

    if (n <= 4096) {
        Eigen::SparseQR<SparseC, Eigen::COLAMDOrdering<int>> qr;
        qr.setPivotThreshold(1e-12 * std::max(1.0, L.norm()));
        qr.compute(L);
        if (qr.info() == Eigen::Success && n - static_cast<long>(qr.rank()) > 1)
            throw NonUniqueSteadyState("oracle steady state is not unique", n - static_cast<long>(qr.rank()));
    }

    // Replace the first balance row (vec index 0 is rho_00) with the trace functional.
    std::vector<Triplet> trip;
    trip.reserve(L.nonZeros() + d);
    for (Eigen::Index c = 0; c < L.outerSize(); ++c)
        for (SparseC::InnerIterator it(L, c); it; ++it)
            if (it.row() != 0) trip.emplace_back(it.row(), it.col(), it.value());
    for (long i = 0; i < d; ++i) trip.emplace_back(0, i * (d + 1), 1.0);
    SparseC A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs(0) = 1.0;
    Eigen::SparseLU<SparseC> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw ConvergenceError("oracle steady-state LU factorization failed");
    Eigen::VectorXcd v = lu.solve(rhs);
    v += lu.solve(Eigen::VectorXcd(rhs - A * v));

    DenseState rho = unvectorize(v, d);
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace();
    double lnorm = 0.0;
    for (Eigen::Index c = 0; c < L.outerSize(); ++c) {
        double s = 0.0;
        for (SparseC::InnerIterator it(L, c); it; ++it) s += std::abs(it.value());
        lnorm = std::max(lnorm, s);
    }
    const double residual = (L * vectorize(rho)).cwiseAbs().maxCoeff() / std::max(lnorm, 1e-300);
    if (!(residual <= residual_tol))
        throw ConvergenceError("oracle steady state residual " + std::to_string(residual) + " above tolerance",
                               {residual});
    return {rho, residual};
}

FockLindbladSystem retruncate(const FockLindbladSystem& system, int n_max) {
    EmitterEnsembleSpec spec = system.spec();
    spec.cavity = CavityParams(spec.cavity.omega_c, spec.cavity.kappa, n_max);
    return FockLindbladSystem(spec, true, system.options());
}

} // namespace

OracleSteadyState oracle_steady_state_ex(const FockLindbladSystem& system, const OracleSteadyOptions& opts) {
    FockLindbladSystem sys = system;
    for (;;) {
        auto solved = solve_steady(sys, opts.residual_tol);
        if (!opts.auto_truncation || !sys.include_cavity() || sys.extended() ||
            population_of_top_fock_level(sys, solved.state) < opts.top_population_tol)
            return {std::move(solved.state), sys, solved.residual};
        const int next = 2 * sys.spec().cavity.n_max;
        if (next > opts.max_n_max)
            throw ConvergenceError("Fock truncation did not converge below n_max=" + std::to_string(opts.max_n_max));
        sys = retruncate(sys, next);
    }
}

DenseState oracle_steady_state(const FockLindbladSystem& system, const OracleSteadyOptions& opts) {
    return oracle_steady_state_ex(system, opts).state;
}

std::vector<std::complex<double>> regression(const FockLindbladSystem& system, const DenseState& rho,
                                             const SparseC& jump, const SparseC& observable,
                                             std::span<const double> tau_grid, const ode::Options& opts) {
    const DenseState start = jump * rho * SparseC(jump.adjoint());
    std::vector<std::complex<double>> out;
    for (const auto& v : propagate(system.liouvillian(), vectorize(start), tau_grid, opts))
        out.push_back(expectation(unvectorize(v, system.hilbert_dim()), observable));
    return out;
}

ProductDickeBasis::ProductDickeBasis(int n_emitters) : n_(n_emitters), basis_(n_emitters) {
    if (n_ > 12) throw DimensionLimit("explicit product Dicke basis limited to N <= 12");
    const long dim = 1L << n_;
    // J- = sum_i sigma^-_i on the bare spin register; bit i of the index is emitter i
    // counted from the most significant side, matching the Kronecker order.
    Eigen::MatrixXd jminus = Eigen::MatrixXd::Zero(dim, dim);
    for (long s = 0; s < dim; ++s)
        for (int i = 0; i < n_; ++i) {
            const long bit = 1L << (n_ - 1 - i);
            if (s & bit) jminus(s ^ bit, s) += 1.0;
        }
    const Eigen::MatrixXd jplus = jminus.transpose();

    multiplets_.resize(basis_.block_count());
    for (int b = 0; b < basis_.block_count(); ++b) {
        const int tj = basis_.two_j(b);
        const int excited = (n_ + tj) / 2; // M = J sector
        std::vector<long> sector, above;
        for (long s = 0; s < dim; ++s) {
            const int pc = std::popcount(static_cast<unsigned long>(s));
            if (pc == excited) sector.push_back(s);
            if (pc == excited + 1) above.push_back(s);
        }
        // Highest-weight vectors: kernel of J+ restricted to the M = J sector.
        Eigen::MatrixXd restricted(std::max<std::size_t>(above.size(), 1), sector.size());
        restricted.setZero();
        for (std::size_t c = 0; c < sector.size(); ++c)
            for (std::size_t r = 0; r < above.size(); ++r) restricted(r, c) = jplus(above[r], sector[c]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(restricted, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        int rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > 1e-9) ++rank;
        const long kernel_dim = static_cast<long>(sector.size()) - rank;
        const long expected = std::lround(std::exp(dicke::DickeBasis::log_multiplicity(n_, tj)));
        if (kernel_dim != expected) throw Error("product Dicke basis: multiplicity mismatch");
        const Eigen::MatrixXd kernel = svd.matrixV().rightCols(kernel_dim);

        for (long a = 0; a < kernel_dim; ++a) {
            Eigen::MatrixXcd mult = Eigen::MatrixXcd::Zero(dim, tj + 1);
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            for (std::size_t c = 0; c < sector.size(); ++c) v(sector[c]) = kernel(c, a);
            mult.col(tj) = v.cast<Complex>();
            for (int i = tj; i > 0; --i) {
                const int two_m = 2 * i - tj;
                v = jminus * v / std::sqrt(dicke::a_minus_squared(tj, two_m));
                mult.col(i - 1) = v.cast<Complex>();
            }
            multiplets_[b].push_back(std::move(mult));
        }
    }
}

dicke::DickeBlockState symmetrize_and_project(const DenseState& rho, int n_emitters) {
    const ProductDickeBasis pb(n_emitters);
    if (rho.rows() != (1L << n_emitters)) throw InvalidArgument("state is not an emitter-only state of this N");
    dicke::DickeBlockState out(pb.dicke_basis());
    for (int b = 0; b < pb.dicke_basis().block_count(); ++b)
        for (const auto& v : pb.multiplets(b)) out.block(b) += v.adjoint() * rho * v;
    return out;
}

dicke::DickeBlockState symmetrize_and_project(const FockLindbladSystem& system, const DenseState& rho) {
    if (system.include_cavity()) throw InvalidArgument("trace out the cavity before projecting onto Dicke blocks");
    if (!system.spec().identical()) throw InvalidArgument("Dicke projection requires identical emitters");
    return symmetrize_and_project(rho, system.n_emitters());
}

DenseState embed(const dicke::DickeBlockState& rho) {
    const int n = rho.basis().n_emitters();
    const ProductDickeBasis pb(n);
    DenseState out = DenseState::Zero(1L << n, 1L << n);
    for (int b = 0; b < pb.dicke_basis().block_count(); ++b) {
        const auto& mults = pb.multiplets(b);
        const double inv = 1.0 / static_cast<double>(mults.size());
        for (const auto& v : mults) out += inv * (v * rho.block(b) * v.adjoint());
    }
    return out;
}

} // namespace dickecav::oracle

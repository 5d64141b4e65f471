#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>
#include <Eigen/SparseQR>

#include "dickecav/dicke.hpp"
#include "dickecav/error.hpp"

namespace dickecav::dicke {

namespace {

using Complex = std::complex<double>;

// Dimension of the null space of the population generator. The sector is a
// classical rate matrix, so rank-revealing sparse QR is reliable here.
long null_dimension(const Eigen::SparseMatrix<double>& P) {
    Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(1e-12 * std::max(1.0, P.norm()));
    qr.compute(P);
    if (qr.info() != Eigen::Success) return -1;
    return static_cast<long>(P.cols()) - static_cast<long>(qr.rank());
}

// Solves P p = 0 with sum(p) = 1 by replacing the first balance equation.
Eigen::VectorXd solve_populations(const Eigen::SparseMatrix<double>& P) {
    const Eigen::Index n = P.rows();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(P.nonZeros() + n);
    for (Eigen::Index c = 0; c < P.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(P, c); it; ++it)
            if (it.row() != 0) trip.emplace_back(it.row(), it.col(), it.value());
    for (Eigen::Index c = 0; c < n; ++c) trip.emplace_back(0, c, 1.0);
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = 1.0;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw ConvergenceError("sparse LU factorization of the steady-state system failed");
    Eigen::VectorXd p = lu.solve(rhs);
    // one step of iterative refinement
    const Eigen::VectorXd r = rhs - A * p;
    p += lu.solve(r);
    return p;
}

} // namespace

SteadyStateResult steady_state_with_residual(const DickeLiouvillian& L, const SteadyStateOptions& opts) {
    const auto& P = L.population_generator();
    const double lnorm = std::max(L.norm(), 1e-300);
    const long nulldim = null_dimension(P);
    if (nulldim > 1)
        throw NonUniqueSteadyState("Dicke steady state is not unique (null space dimension " +
                                       std::to_string(nulldim) + ")",
                                   nulldim);

    Eigen::VectorXd p = solve_populations(P);
    auto residual_of = [&](const Eigen::VectorXd& v) { return (P * v).lpNorm<Eigen::Infinity>() / lnorm; };
    double res = residual_of(p);
    if (!(res <= opts.residual_tol)) {
        // relax the direct solution further in time as a fallback
        Eigen::VectorXd start = p.cwiseMax(0.0);
        start /= start.sum();
        const double times[] = {0.0, opts.fallback_time};
        p = evolve_populations(L, start, times).back();
        p /= p.sum();
        res = residual_of(p);
        if (!(res <= opts.residual_tol))
            throw ConvergenceError("Dicke steady state residual " + std::to_string(res) + " above tolerance", {res});
    }
    auto state = DickeBlockState::from_populations(L.basis(), std::span<const double>(p.data(), p.size()));
    // residual on the full generator (coherence sectors are decoupled and empty)
    const Eigen::VectorXcd full_res = L.generator() * state.to_vector();
    res = std::max(res, full_res.cwiseAbs().maxCoeff() / lnorm);
    return {std::move(state), res};
}

DickeBlockState steady_state(const DickeLiouvillian& L, const SteadyStateOptions& opts) {
    return steady_state_with_residual(L, opts).state;
}

std::vector<Eigen::VectorXd> evolve_populations(const DickeLiouvillian& L, const Eigen::VectorXd& p0,
                                                std::span<const double> t_grid, const ode::Options& opts) {
    const auto& P = L.population_generator();
    if (p0.size() != P.cols()) throw InvalidArgument("population vector has wrong length");
    auto rhs = [&P](std::span<const double> x, std::span<double> dx) {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::Map<Eigen::VectorXd> dv(dx.data(), static_cast<Eigen::Index>(dx.size()));
        dv.noalias() = P * xv;
    };
    const auto states = ode::integrate(rhs, ode::State(p0.data(), p0.data() + p0.size()), t_grid, opts);
    std::vector<Eigen::VectorXd> out;
    out.reserve(states.size());
    for (const auto& s : states) out.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()));
    return out;
}

std::vector<DickeBlockState> evolve(const DickeLiouvillian& L, const DickeBlockState& rho0,
                                    std::span<const double> t_grid, const ode::Options& opts) {
    if (rho0.basis().n_emitters() != L.basis().n_emitters()) throw InvalidArgument("state and generator differ in N");
    std::vector<DickeBlockState> out;
    out.reserve(t_grid.size());
    if (!rho0.has_coherences()) {
        const auto p = rho0.populations();
        const Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
        for (const auto& v : evolve_populations(L, p0, t_grid, opts))
            out.push_back(DickeBlockState::from_populations(L.basis(), std::span<const double>(v.data(), v.size())));
        return out;
    }

    const auto& G = L.generator();
    auto rhs = [&G](std::span<const double> x, std::span<double> dx) {
        const auto xc = ode::as_complex(x);
        auto dc = ode::as_complex(dx);
        Eigen::Map<const Eigen::VectorXcd> xv(xc.data(), static_cast<Eigen::Index>(xc.size()));
        Eigen::Map<Eigen::VectorXcd> dv(dc.data(), static_cast<Eigen::Index>(dc.size()));
        dv.noalias() = G * xv;
    };
    const Eigen::VectorXcd v0 = rho0.to_vector();
    const auto* raw = reinterpret_cast<const double*>(v0.data());
    const auto states = ode::integrate(rhs, ode::State(raw, raw + 2 * v0.size()), t_grid, opts);
    for (const auto& s : states)
        out.push_back(DickeBlockState::from_vector(L.basis(), ode::as_complex(std::span<const double>(s))));
    return out;
}

double radiation_rate(const DickeBlockState& rho, double Gamma) { return Gamma * rho.jplus_jminus(); }

std::vector<double> log_log_slopes(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw InvalidArgument("slope arrays differ in length");
    std::vector<double> s(n, std::nan(""));
    if (n < 2) return s;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("log-log slope needs positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    s[0] = (ly[1] - ly[0]) / (lx[1] - lx[0]);
    s[n - 1] = (ly[n - 1] - ly[n - 2]) / (lx[n - 1] - lx[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = lx[i] - lx[i - 1], h1 = lx[i + 1] - lx[i];
        s[i] = (h0 * h0 * (ly[i + 1] - ly[i]) + h1 * h1 * (ly[i] - ly[i - 1])) / (h0 * h1 * (h0 + h1));
    }
    return s;
}

namespace {

void check_eta_grid(std::span<const double> eta_grid) {
    for (std::size_t i = 0; i < eta_grid.size(); ++i) {
        if (!(eta_grid[i] > 0.0)) throw InvalidArgument("pump grid must be positive");
        if (i > 0 && !(eta_grid[i] > eta_grid[i - 1])) throw InvalidArgument("pump grid must be ascending");
    }
}

void fill_slopes(std::vector<PumpPoint>& pts) {
    std::vector<double> x, y;
    for (const auto& p : pts) {
        x.push_back(p.eta);
        y.push_back(p.radiation);
    }
    const auto s = log_log_slopes(x, y);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].local_slope = s[i];
}

} // namespace

std::vector<PumpPoint> pump_scaling_curve(int n_emitters, double Gamma, const RateSet& rates,
                                          std::span<const double> eta_grid) {
    check_eta_grid(eta_grid);
    std::vector<PumpPoint> pts;
    for (double eta : eta_grid) {
        const RateSet r(rates.gamma, rates.chi, eta);
        const auto L = build_liouvillian(n_emitters, Gamma, r);
        pts.push_back({eta / rates.gamma, eta, Gamma, radiation_rate(steady_state(L), Gamma), 0.0});
    }
    fill_slopes(pts);
    return pts;
}

std::vector<PumpPoint> pump_scaling_curve(int n_emitters, const SubEnsemble& emitters, const CavityParams& cavity,
                                          std::span<const double> eta_grid, GammaDressing dressing) {
    check_eta_grid(eta_grid);
    std::vector<PumpPoint> pts;
    for (double eta : eta_grid) {
        const RateSet r(emitters.rates.gamma, emitters.rates.chi, eta);
        const SubEnsemble e(n_emitters, emitters.omega, emitters.g, r);
        const auto eff = effective_coupling(e, cavity, dressing);
        const auto L = build_liouvillian(n_emitters, eff.Gamma, r, eff.delta_omega);
        pts.push_back({eta / r.gamma, eta, eff.Gamma, radiation_rate(steady_state(L), eff.Gamma), 0.0});
    }
    fill_slopes(pts);
    return pts;
}

} // namespace dickecav::dicke

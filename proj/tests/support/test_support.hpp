// Shared fixtures for the unit and acceptance suites.

#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "dickecav/dicke.hpp"

namespace dickecav::testing {

// 10^U(lo, hi)
inline double log_uniform(std::mt19937_64& rng, double lo_exp, double hi_exp) {
    std::uniform_real_distribution<double> u(lo_exp, hi_exp);
    return std::pow(10.0, u(rng));
}

inline dicke::CollectiveRates random_rates(std::mt19937_64& rng, bool with_shift = true) {
    dicke::CollectiveRates r;
    r.Gamma = log_uniform(rng, -1.0, 1.0);
    r.gamma = log_uniform(rng, -1.0, 1.0);
    r.chi = log_uniform(rng, -1.0, 1.0);
    r.eta = log_uniform(rng, -1.0, 1.0);
    if (with_shift) r.delta_omega = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    return r;
}

// Random full-rank block state with coherences inside each J block.
inline dicke::DickeBlockState random_block_state(const dicke::DickeBasis& basis, std::mt19937_64& rng) {
    std::normal_distribution<double> n01;
    dicke::DickeBlockState s(basis);
    double total = 0.0;
    for (int b = 0; b < basis.block_count(); ++b) {
        const int d = basis.block_dim(b);
        Eigen::MatrixXcd x(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) x(i, j) = {n01(rng), n01(rng)};
        s.block(b) = x * x.adjoint();
        total += s.block(b).trace().real();
    }
    for (int b = 0; b < basis.block_count(); ++b) s.block(b) /= total;
    return s;
}

} // namespace dickecav::testing

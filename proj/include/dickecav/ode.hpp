// ode.hpp: adaptive Dormand–Prince integration of autonomous linear/nonlinear systems

#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dickecav::ode {

using State = std::vector<double>;
// dx/dt = f(x); both spans have the state length.
using Rhs = std::function<void(std::span<const double> x, std::span<double> dxdt)>;

struct Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double initial_step = 1e-4;
    double min_step = 1e-14;
    std::size_t max_steps = 50'000'000;
};

// Integrates from times.front() and returns the state at every entry of
// `times` (which must be non-decreasing); result[0] == x0.
// Throws ConvergenceError carrying the failure time on step-size underflow
// or when the step budget is exhausted.
std::vector<State> integrate(const Rhs& rhs, State x0, std::span<const double> times, const Options& opts = {});

// Views an interleaved real buffer as complex values.
inline std::span<const std::complex<double>> as_complex(std::span<const double> x) {
    return {reinterpret_cast<const std::complex<double>*>(x.data()), x.size() / 2};
}
inline std::span<std::complex<double>> as_complex(std::span<double> x) {
    return {reinterpret_cast<std::complex<double>*>(x.data()), x.size() / 2};
}

} // namespace dickecav::ode

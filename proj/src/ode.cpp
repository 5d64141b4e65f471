#include "dickecav/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "dickecav/error.hpp"

namespace dickecav::ode {

namespace odeint = boost::numeric::odeint;

std::vector<State> integrate(const Rhs& rhs, State x0, std::span<const double> times, const Options& opts) {
    std::vector<State> out;
    if (times.empty()) return out;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] >= times[i - 1])) throw InvalidArgument("ODE output times must be non-decreasing");

    auto system = [&rhs](const State& x, State& dxdt, double /*t*/) {
        rhs(std::span<const double>(x), std::span<double>(dxdt));
    };
    auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol, odeint::runge_kutta_dopri5<State>());

    out.reserve(times.size());
    State x = std::move(x0);
    double t = times.front();
    double h = opts.initial_step;
    std::size_t steps = 0;
    out.push_back(x);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double target = times[k];
        while (t < target) {
            const double remaining = target - t;
            // avoid leaving a sliver step behind
            const bool last = remaining <= 1.01 * h;
            double dt = last ? remaining : h;
            const auto result = stepper.try_step(system, x, t, dt);
            if (result == odeint::success) {
                if (last) t = target;
                h = last ? std::max(h, dt) : dt;
            } else {
                h = dt;
            }
            if (h < opts.min_step * std::max(1.0, std::abs(t)))
                throw ConvergenceError("ODE step size underflow at t=" + std::to_string(t) + " ns", {}, t);
            if (++steps > opts.max_steps)
                throw ConvergenceError("ODE step budget exhausted at t=" + std::to_string(t) + " ns", {}, t);
        }
        out.push_back(x);
    }
    return out;
}

} // namespace dickecav::ode

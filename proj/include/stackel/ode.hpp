#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "stackel/errors.hpp"

namespace stk {

// Adaptive Runge-Kutta-Fehlberg 7(8) integration of a fixed-size real system,
// stopping exactly at each requested abscissa (monotone, starting after t0).
template <std::size_t N, class Rhs, class Observer>
void integrate_through(Rhs&& rhs, std::array<double, N>& state, double t0, const std::vector<double>& stops,
                       double rtol, double atol, Observer&& observe, int max_steps = 200000) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, N>;
    if (stops.empty()) return;
    std::vector<double> times;
    times.reserve(stops.size() + 1);
    times.push_back(t0);
    times.insert(times.end(), stops.begin(), stops.end());
    auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(atol, rtol);
    auto system = [&](const State& y, State& dy, double t) { rhs(y, dy, t); };
    std::size_t index = 0;
    auto observer = [&](const State& y, double) {
        if (index > 0) observe(index - 1, y);
        ++index;
    };
    double dt = (times[1] - times[0]) * 1e-3;
    try {
        odeint::integrate_times(stepper, system, state, times.begin(), times.end(), dt, observer,
                                odeint::max_step_checker(max_steps));
    } catch (const odeint::step_adjustment_error& e) {
        throw StackelError("accuracy", std::string("integrator step adjustment failed: ") + e.what());
    } catch (const odeint::no_progress_error& e) {
        throw StackelError("accuracy", std::string("integrator made no progress: ") + e.what());
    }
}

}  // namespace stk

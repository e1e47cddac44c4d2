#pragma once

// Adaptive integration driver around the embedded Dormand-Prince 5(4) pair.
// (The Fehlberg 7(8) error estimate misjudges the nearly quadrature-like
// asymptotic tails integrated here, so it is not used.) The driver owns the step loop so that step-size underflow and runaway
// step counts surface as library errors, and so callers can stop exactly at
// requested output times.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include "conic_scatter/errors.hpp"

namespace conic_scatter {

template <std::size_t N>
class AdaptiveIntegrator {
 public:
  using State = std::array<double, N>;

  explicit AdaptiveIntegrator(double tol, std::size_t max_steps = 5'000'000)
      : stepper_(boost::numeric::odeint::make_controlled(
            tol, tol, boost::numeric::odeint::runge_kutta_dopri5<State>())),
        max_steps_(max_steps) {
    require(tol > 0.0 && std::isfinite(tol), ErrorKind::invalid_input, "integration tolerance must be positive");
  }

  /// Advances (x, t) to t_end. `on_step(x, t)` runs after every accepted step.
  template <class Rhs, class OnStep>
  void advance(Rhs&& rhs, State& x, double& t, double t_end, OnStep&& on_step) {
    using boost::numeric::odeint::success;
    const double direction = t_end >= t ? 1.0 : -1.0;
    if (step_ == 0.0) step_ = direction * std::min(1e-2, std::max(1e-6, std::abs(t_end - t)));
    if (step_ * direction < 0.0) step_ = -step_;

    while (std::abs(t_end - t) > 4e-16 * std::max(1.0, std::abs(t_end))) {
      const double remaining = t_end - t;
      const bool clamped = std::abs(step_) >= std::abs(remaining);
      double dt = clamped ? remaining : step_;
      const double proposed = dt;
      const auto result = stepper_.try_step(rhs, x, t, dt);
      if (result == success) {
        ++accepted_;
        if (clamped) {
          t = t_end;
          if (std::abs(dt) > std::abs(step_)) step_ = dt;
        } else {
          step_ = dt;
        }
        on_step(static_cast<const State&>(x), t);
        for (double v : x) {
          if (!std::isfinite(v)) fail(ErrorKind::integration_failure, "non-finite state at t=" + std::to_string(t));
        }
      } else {
        step_ = dt;
        if (std::abs(dt) < 1e-14 * std::max(1.0, std::abs(t)) || std::abs(dt) >= std::abs(proposed)) {
          fail(ErrorKind::integration_failure, "step-size underflow at t=" + std::to_string(t));
        }
      }
      if (accepted_ > max_steps_) fail(ErrorKind::integration_failure, "step budget exhausted");
    }
  }

  template <class Rhs>
  void advance(Rhs&& rhs, State& x, double& t, double t_end) {
    advance(std::forward<Rhs>(rhs), x, t, t_end, [](const State&, double) {});
  }

  std::size_t accepted_steps() const { return accepted_; }

 private:
  using Stepper = decltype(boost::numeric::odeint::make_controlled(
      1.0, 1.0, boost::numeric::odeint::runge_kutta_dopri5<State>()));
  Stepper stepper_;
  std::size_t max_steps_;
  std::size_t accepted_ = 0;
  double step_ = 0.0;
};

}  // namespace conic_scatter

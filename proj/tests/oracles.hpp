// Copyright 2026 The qpdyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference computations shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "qpdyn/model.hpp"

namespace qpdyn::oracle {

/// Integrates dx/dt = -r x^2 - s x + g from x(0) = x0 + x_in with an
/// adaptive Dormand-Prince stepper and returns x at each requested time.
inline std::vector<double> integrate_density(const QpDynamics& d, std::span<const double> times) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  const auto rhs = [&](const State& x, State& dxdt, double) {
    dxdt[0] = -d.r * x[0] * x[0] - d.s * x[0] + d.g;
  };
  State x{d.x0 + d.x_in};
  std::vector<double> out;
  const double abs_tol = 1e-16 * std::max(d.x0 + d.x_in, 1e-300);
  auto stepper = odeint::make_controlled(abs_tol, 1e-13, odeint::runge_kutta_dopri5<State>());
  std::vector<double> grid(times.begin(), times.end());
  odeint::integrate_times(stepper, rhs, x, grid.begin(), grid.end(), 1e-9 / std::max(d.s, 1.0),
                          [&](const State& s, double) { out.push_back(s[0]); });
  return out;
}

/// Direct formula for the coupling, sqrt(2 w_q Delta / (pi^2 hbar)).
inline double coupling(double f_q, double f_gap) {
  const double w_q = 2.0 * M_PI * f_q;
  const double delta = constants::kPlanck * f_gap;
  return std::sqrt(2.0 * w_q * delta / (M_PI * M_PI * constants::kHbar));
}

/// Fraction of a Gaussian beam of per-axis deviation sigma passing a
/// half-plane edge at distance d from its centre (positive means open).
inline double half_plane_transmission(double d, double sigma) {
  return 0.5 * std::erfc(-d / (std::sqrt(2.0) * sigma));
}

/// 10-90% width of the knife-edge profile of a beam with 1/e^2 radius w.
inline double knife_edge_width_10_90(double w) {
  // 2 * sqrt(2) * erfinv(0.8) * sigma with sigma = w / 2.
  return 2.0 * 0.9061938024368232 * std::sqrt(2.0) * (0.5 * w);
}

}  // namespace qpdyn::oracle

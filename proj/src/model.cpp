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

#include "qpdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qpdyn/errors.hpp"

namespace qpdyn {

namespace {

// Beyond this exponent the transient is below 1e-300 of the asymptote.
constexpr double kMaxExponent = 700.0;

// expm1(k t) / k, continuous through k = 0.
double expm1_over(double k, double t) {
  const double kt = k * t;
  if (std::abs(kt) < 1e-5) {
    return t * (1.0 + kt / 2.0 + kt * kt / 6.0);
  }
  return std::expm1(kt) / k;
}

// d/dk of expm1_over.
double expm1_over_dk(double k, double t) {
  const double kt = k * t;
  if (std::abs(kt) < 1e-5) {
    return t * t * (0.5 + kt / 3.0 + kt * kt / 8.0);
  }
  return (t * std::exp(kt) - expm1_over(k, t)) / k;
}

// Excess density y = x - x0 for the Bernoulli form of the rate equation,
// y(t) = x_in / (e^{kt} + r x_in (e^{kt} - 1) / k) with k = s + 2 r x0.
double excess_density(double x_in, double k, double r, double t) {
  if (x_in == 0.0) return 0.0;
  const double kt = k * t;
  if (kt > kMaxExponent) return 0.0;
  const double q = std::exp(kt) + r * x_in * expm1_over(k, t);
  return x_in / q;
}

void require_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite and >= 0");
  }
}

}  // namespace

void DeviceParams::validate() const {
  if (!(f_q > 0.0) || !(f_gap > 0.0)) {
    throw DomainError("device: f_q and f_gap must be positive");
  }
  if (!(f_q < 2.0 * f_gap)) {
    throw DomainError("device: qubit frequency above pair-breaking threshold");
  }
  if (!(gamma_ext >= 0.0) || !(gamma0 >= gamma_ext)) {
    throw DomainError("device: require gamma0 >= gamma_ext >= 0");
  }
}

QpDynamics QpDynamics::with_steady_state(double s, double r, double x0,
                                         double x_in) {
  QpDynamics d;
  d.s = s;
  d.r = r;
  d.x0 = x0;
  d.x_in = x_in;
  d.g = s * x0 + r * x0 * x0;
  return d;
}

void QpDynamics::validate(double rel_tol) const {
  require_nonneg(s, "s");
  require_nonneg(r, "r");
  require_nonneg(g, "g");
  require_nonneg(x0, "x0");
  require_nonneg(x_in, "x_in");
  const double stationary = s * x0 + r * x0 * x0;
  const double scale = std::max({g, stationary, std::numeric_limits<double>::min()});
  if (std::abs(g - stationary) > rel_tol * scale) {
    throw DomainError("dynamics: g inconsistent with steady state s*x0 + r*x0^2");
  }
}

std::string_view to_string(BeamPosition p) {
  switch (p) {
    case BeamPosition::A: return "A";
    case BeamPosition::B: return "B";
    case BeamPosition::C: return "C";
  }
  return "?";
}

BeamPosition parse_position(std::string_view s) {
  if (s == "A" || s == "a") return BeamPosition::A;
  if (s == "B" || s == "b") return BeamPosition::B;
  if (s == "C" || s == "c") return BeamPosition::C;
  throw DomainError("unknown beam position '" + std::string(s) + "'");
}

void OpticalDrive::validate() const {
  require_nonneg(power, "power");
  require_nonneg(pulse_len, "pulse_len");
  require_nonneg(mu, "mu");
}

double qp_coupling(const DeviceParams& dev) {
  // sqrt(2 w_q Delta / (pi^2 hbar)) with w_q = 2 pi f_q, Delta = h f_gap.
  return std::sqrt(8.0 * dev.f_q * dev.f_gap);
}

double decay_rate(const DeviceParams& dev, double x_qp) {
  if (!(x_qp >= 0.0)) throw DomainError("decay_rate: x_qp must be >= 0");
  return qp_coupling(dev) * x_qp + dev.gamma0;
}

double xqp_at(const QpDynamics& dyn, double t) {
  if (!(t >= 0.0)) throw DomainError("xqp_trajectory: times must be >= 0");
  const double k = dyn.s + 2.0 * dyn.r * dyn.x0;
  return excess_density(dyn.x_in, k, dyn.r, t) + dyn.x0;
}

std::vector<double> xqp_trajectory(const QpDynamics& dyn,
                                   std::span<const double> t) {
  std::vector<double> out;
  out.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0 && t[i] < t[i - 1]) {
      throw DomainError("xqp_trajectory: time grid must be sorted");
    }
    out.push_back(xqp_at(dyn, t[i]));
  }
  return out;
}

double gamma_recovery_at(const DeviceParams& dev, const QpDynamics& dyn,
                         double t) {
  if (!(t >= 0.0)) throw DomainError("gamma_recovery: times must be >= 0");
  const double c = qp_coupling(dev);
  const double x0 = (dev.gamma0 - dev.gamma_ext) / c;
  const double k = dyn.s + 2.0 * dyn.r * x0;
  return c * excess_density(dyn.x_in, k, dyn.r, t) + dev.gamma0;
}

std::vector<double> gamma_recovery(const DeviceParams& dev,
                                   const QpDynamics& dyn,
                                   std::span<const double> t) {
  std::vector<double> out;
  out.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0 && t[i] < t[i - 1]) {
      throw DomainError("gamma_recovery: time grid must be sorted");
    }
    out.push_back(gamma_recovery_at(dev, dyn, t[i]));
  }
  return out;
}

RecoveryGradient gamma_recovery_gradient(double coupling, double x_in,
                                         double gamma0, double s, double r,
                                         double t) {
  RecoveryGradient out;
  const double x0 = gamma0 / coupling;
  const double k = s + 2.0 * r * x0;
  const double kt = k * t;
  out.d_gamma0 = 1.0;
  if (kt > kMaxExponent) {
    out.value = gamma0;
    return out;
  }
  const double e = std::exp(kt);
  const double phi = expm1_over(k, t);
  const double q = e + r * x_in * phi;
  const double y = x_in / q;
  out.value = coupling * y + gamma0;

  // y = x_in / Q, Q = e^{kt} + r x_in phi(k, t).
  const double dq_dk = t * e + r * x_in * expm1_over_dk(k, t);
  const double dy_dk = -x_in * dq_dk / (q * q);
  const double dy_dxin = e / (q * q);
  const double dy_dr_direct = -x_in * x_in * phi / (q * q);

  out.d_x_in = coupling * dy_dxin;
  out.d_s = coupling * dy_dk;
  // dk/dGamma0 = 2 r / C.
  out.d_gamma0 = 1.0 + 2.0 * r * dy_dk;
  out.d_r = coupling * (dy_dr_direct + dy_dk * 2.0 * x0);
  return out;
}

double cw_gamma(const DeviceParams& dev, const OpticalDrive& drive) {
  if (!(drive.power >= 0.0)) throw DomainError("cw_gamma: power must be >= 0");
  return qp_coupling(dev) * drive.mu * drive.power + dev.gamma0;
}

double freq_shift(const DeviceParams& dev, double x_qp, double slope_scale,
                  double prefactor) {
  if (!(x_qp >= 0.0)) throw DomainError("freq_shift: x_qp must be >= 0");
  if (!(slope_scale > 0.0)) throw DomainError("freq_shift: slope_scale must be > 0");
  return -slope_scale * prefactor * qp_coupling(dev) * x_qp;
}

CoherenceSet dephasing_decompose(double t1, double t2_star) {
  if (!(t1 > 0.0) || !(t2_star > 0.0)) {
    throw DomainError("dephasing_decompose: times must be positive");
  }
  if (t2_star > 2.0 * t1 * (1.0 + 1e-9)) {
    throw InfeasibleDecompositionError(
        "dephasing_decompose: T2* exceeds 2 T1, no consistent T_phi");
  }
  CoherenceSet out{t1, t2_star, std::nullopt};
  const double rate = 1.0 / t2_star - 1.0 / (2.0 * t1);
  if (rate > 0.0) out.t_phi = 1.0 / rate;
  return out;
}

double compose_t2_star(double t1, std::optional<double> t_phi) {
  const double phi_rate = t_phi ? 1.0 / *t_phi : 0.0;
  return 1.0 / (phi_rate + 1.0 / (2.0 * t1));
}

double thermal_xqp(const DeviceParams& dev, double temp) {
  if (!(temp >= 0.0)) throw DomainError("thermal_xqp: temperature must be >= 0");
  if (temp == 0.0) return 0.0;
  const double ratio = constants::kBoltzmann * temp /
                       (constants::kPlanck * dev.f_gap);  // kT / Delta
  return std::sqrt(2.0 * std::numbers::pi * ratio) * std::exp(-1.0 / ratio);
}

double thermometry(const DeviceParams& dev, double p_e) {
  if (!(p_e > 0.0)) throw DomainError("thermometry: population must be > 0");
  if (!(p_e < 0.5)) {
    throw NonThermalStateError("thermometry: p_e >= 0.5 is not a thermal state");
  }
  const double energy_k = constants::kPlanck * dev.f_q / constants::kBoltzmann;
  return energy_k / std::log((1.0 - p_e) / p_e);
}

double excited_population(const DeviceParams& dev, double temp) {
  if (!(temp >= 0.0)) throw DomainError("excited_population: temperature must be >= 0");
  if (temp == 0.0) return 0.0;
  const double boltz =
      std::exp(-constants::kPlanck * dev.f_q / (constants::kBoltzmann * temp));
  return boltz / (1.0 + boltz);
}

double gap_suppression(const DeviceParams& dev, double x_qp) {
  if (!(x_qp >= 0.0) || !(x_qp < 1.0)) {
    throw DomainError("gap_suppression: require 0 <= x_qp < 1");
  }
  return dev.f_gap * (1.0 - x_qp);
}

double diffusion_time(double pad_len, double diff_const) {
  if (!(pad_len > 0.0) || !(diff_const > 0.0)) {
    throw DomainError("diffusion_time: arguments must be positive");
  }
  return pad_len * pad_len / diff_const;
}

bool trapping_negligible(double diffusion_time, double trapping_rate) {
  return diffusion_time < 1.0 / trapping_rate;
}

}  // namespace qpdyn

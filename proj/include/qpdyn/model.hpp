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

// Forward physics of a quasiparticle-limited transmon: decay-rate coupling,
// Rothwarf-Taylor recovery, CW injection, dephasing bookkeeping and
// thermometry. Everything here is a pure function of its arguments.
//
// Unit system: SI throughout. Frequencies f_* in Hz, rates in 1/s (angular
// where the name says so), powers in W, times in s, temperatures in K.
// Quasiparticle densities are normalized and dimensionless.

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qpdyn {

namespace constants {
inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K
inline constexpr double kHbar = 1.054571817e-34;      // J s
}  // namespace constants

struct DeviceParams {
  double f_q = 6.30e9;        // qubit transition frequency, Hz
  double f_gap = 46.9e9;      // gap frequency, Delta = h * f_gap, Hz
  double gamma0 = 1.0e5;      // baseline decay rate, 1/s
  double gamma_ext = 0.0;     // non-quasiparticle decay rate, 1/s

  /// Throws DomainError when an invariant is violated.
  void validate() const;
};

struct QpDynamics {
  double s = 9.0e3;   // trapping rate, 1/s
  double r = 0.0;     // recombination coefficient, 1/s
  double g = 0.0;     // generation rate, 1/s
  double x0 = 0.0;    // steady-state density
  double x_in = 0.0;  // injected density at zero delay

  /// Builds a consistent parameter set, deriving g from the stationary point.
  static QpDynamics with_steady_state(double s, double r, double x0,
                                      double x_in);

  /// Sign checks plus |g - (s x0 + r x0^2)| within relative tolerance.
  void validate(double rel_tol = 1e-9) const;
};

enum class BeamPosition { A, B, C };

std::string_view to_string(BeamPosition p);
BeamPosition parse_position(std::string_view s);

struct OpticalDrive {
  BeamPosition position = BeamPosition::A;
  double power = 0.0;         // W
  double pulse_len = 0.0;     // s
  double mu = 0.0;            // injected density per watt (CW), 1/W
  double lambda_shift = 0.0;  // frequency pull, rad/s per W

  void validate() const;
  double pulse_energy() const { return power * pulse_len; }
};

struct CoherenceSet {
  double t1 = 0.0;
  double t2_star = 0.0;
  /// Empty when the qubit is T1-limited (T2* = 2 T1).
  std::optional<double> t_phi;
};

/// Rate per unit normalized density, C = sqrt(2 w_q Delta / (pi^2 hbar)).
double qp_coupling(const DeviceParams& dev);

/// Gamma = C x_qp + Gamma_0.
double decay_rate(const DeviceParams& dev, double x_qp);

/// Density after a delay t, for one time point. x_in > 0 decays to x0.
double xqp_at(const QpDynamics& dyn, double t);

/// Closed-form solution of dx/dt = -r x^2 - s x + g, evaluated on a grid.
std::vector<double> xqp_trajectory(const QpDynamics& dyn,
                                   std::span<const double> t);

/// Recovery of the qubit decay rate after an injection. Uses x0 = Gamma_0 / C
/// (the dyn.x0 field is ignored) so that Gamma(t -> inf) = Gamma_0.
double gamma_recovery_at(const DeviceParams& dev, const QpDynamics& dyn,
                         double t);
std::vector<double> gamma_recovery(const DeviceParams& dev,
                                   const QpDynamics& dyn,
                                   std::span<const double> t);

/// Partial derivatives of the recovery rate with respect to its fit
/// parameters, holding C fixed.
struct RecoveryGradient {
  double value = 0.0;
  double d_x_in = 0.0;
  double d_gamma0 = 0.0;
  double d_s = 0.0;
  double d_r = 0.0;
};
RecoveryGradient gamma_recovery_gradient(double coupling, double x_in,
                                         double gamma0, double s, double r,
                                         double t);

/// Steady-state decay rate under CW illumination, Gamma = C mu P + Gamma_0.
double cw_gamma(const DeviceParams& dev, const OpticalDrive& drive);

/// Theory ratio of the reactive to dissipative response used for the
/// frequency pull. Provisional: the exact prefactor is taken from the
/// low-frequency limit and may be overridden by callers.
inline constexpr double kShiftPrefactor = 0.88622692545275801365;  // sqrt(pi)/2

/// Quasiparticle-induced angular frequency shift, negative for x_qp > 0.
double freq_shift(const DeviceParams& dev, double x_qp,
                  double slope_scale = 1.0,
                  double prefactor = kShiftPrefactor);

/// Splits T2* into decay and pure dephasing. Throws
/// InfeasibleDecompositionError when t2_star > 2 t1 (1 + 1e-9).
CoherenceSet dephasing_decompose(double t1, double t2_star);

/// Inverse of dephasing_decompose; an empty t_phi means no pure dephasing.
double compose_t2_star(double t1, std::optional<double> t_phi);

/// Thermal-equilibrium density sqrt(2 pi kT / Delta) exp(-Delta / kT).
double thermal_xqp(const DeviceParams& dev, double temp);

/// Two-level Boltzmann thermometry.
double thermometry(const DeviceParams& dev, double p_e);
double excited_population(const DeviceParams& dev, double temp);

/// Gap frequency reduced by the quasiparticle density. Diagnostic only.
double gap_suppression(const DeviceParams& dev, double x_qp);

/// pad_len^2 / diff_const.
double diffusion_time(double pad_len, double diff_const);

/// Quasiparticle diffusion constant of the aluminium film, m^2/s.
inline constexpr double kDefaultDiffusionConst = 1.8e-3;

/// True when diffusion across the pad is faster than trapping, 1/s.
bool trapping_negligible(double diffusion_time, double trapping_rate);

}  // namespace qpdyn

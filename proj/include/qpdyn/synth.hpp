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

// Synthetic measurement generators for every protocol in the campaign.
// Identical (parameters, seed) give bit-identical output; each trace draws
// from its own RNG stream so generation order does not matter.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qpdyn/bundle.hpp"
#include "qpdyn/model.hpp"
#include "qpdyn/trace.hpp"

namespace qpdyn::synth {

/// Pulse energy -> injected density. The piecewise form (linear, plateau,
/// linear) is phenomenological and exists only to produce saturation-like
/// test shapes.
struct EnergyMap {
  enum class Kind { Linear, Piecewise };
  Kind kind = Kind::Linear;
  double mu_pulse = 1.0e8;         // 1/J, density per joule below the plateau
  double plateau_start = 0.0;      // J
  double plateau_end = 0.0;        // J
  double mu_after = 0.0;           // 1/J, slope past the plateau

  double x_in(double energy) const;
  static EnergyMap linear(double mu_pulse) { return EnergyMap{Kind::Linear, mu_pulse}; }
};

MeasurementTrace gen_t1_trace_at_rate(double gamma, std::span<const double> grid,
                                      const NoiseModel& noise, std::uint64_t seed);

/// exp(-Gamma t) + noise with Gamma = decay_rate(dev, x_qp), clipped to [-0.1, 1.1].
MeasurementTrace gen_t1_trace(const DeviceParams& dev, double x_qp, std::span<const double> grid,
                              const NoiseModel& noise, std::uint64_t seed);

/// 0.5 (1 + exp(-t/T2*) cos(2 pi f t)) + noise, f = detune + shift/2pi.
MeasurementTrace gen_ramsey_trace(const DeviceParams& dev, double x_qp, double t2_star,
                                  double detune, std::span<const double> grid,
                                  const NoiseModel& noise, std::uint64_t seed,
                                  double slope_scale = 1.0);

/// Recovery run: one T1 trace per delay at the rate predicted by the
/// recovery model. `x_in` overrides the energy map when set.
RecoveryRun gen_recovery_sweep(const DeviceParams& dev, const QpDynamics& dyn,
                               const OpticalDrive& drive, const EnergyMap& map,
                               std::span<const double> delays, std::span<const double> t1_grid,
                               const NoiseModel& noise, std::uint64_t seed,
                               std::optional<double> x_in = std::nullopt);

/// Fixed power, varying pulse length.
std::vector<RecoveryRun> gen_pulselen_sweep(const DeviceParams& dev, const QpDynamics& dyn,
                                            const OpticalDrive& drive, const EnergyMap& map,
                                            std::span<const double> pulse_lengths,
                                            std::span<const double> delays,
                                            std::span<const double> t1_grid,
                                            const NoiseModel& noise, std::uint64_t seed);

struct CwOptions {
  int repeats = 10;
  double t_phi = 20e-6;        // constant pure-dephasing time, s
  double detune = 3.0e6;       // nominal Ramsey detuning, Hz
  double slope_scale = 1.0;    // frequency-pull scale relative to theory
  std::size_t t1_points = 60;
  std::size_t ramsey_points = 400;
};

/// Steady-state coherence versus CW power. With noise disabled every row
/// holds the exact model values; otherwise each repetition simulates a T1
/// and a Ramsey trace and fits them.
CwSweep gen_cw_sweep(const DeviceParams& dev, const OpticalDrive& drive,
                     std::span<const double> powers, const CwOptions& opt,
                     const NoiseModel& noise, std::uint64_t seed);

/// e-f power Rabi. The oscillating f population has amplitude p_e without a
/// preceding pi pulse and 1 - p_e with it.
MeasurementTrace gen_ef_rabi(const DeviceParams& dev, double temp, bool with_pi_pulse,
                             std::span<const double> amplitudes, const NoiseModel& noise,
                             std::uint64_t seed, double pi_amplitude = 1.0);

/// Everything needed to produce a full campaign bundle.
struct BundleSpec {
  DeviceParams device;
  QpDynamics dyn;
  std::map<BeamPosition, double> mu_cw;  // 1/W
  std::map<BeamPosition, double> lambda_shift;  // rad/s/W; 0 uses the model pull
  EnergyMap energy_map;
  BeamPosition pulse_position = BeamPosition::A;
  std::vector<double> recovery_powers;   // W
  double pulse_len = 10e-6;              // s
  std::vector<double> pulse_lengths;     // s, for the length sweep
  double length_sweep_power = 1e-6;      // W
  std::vector<double> delays;            // s
  std::vector<double> t1_grid;           // s
  std::map<BeamPosition, std::vector<double>> cw_powers;
  CwOptions cw;
  double temperature = 0.165;            // K, for e-f Rabi; <= 0 skips it
  std::vector<double> rabi_amplitudes;
  NoiseModel noise;
  std::uint64_t seed = 1;
};

/// The reference campaign: s = 9 kHz, r = 0, Gamma0 = 1e5 1/s, pulses of
/// 10 us at position A with x_in from 1e-6 to 1e-2, eight powers below 100 nW.
BundleSpec golden_spec();

/// Default T1 sampling: t = 0 then 59 log-spaced points from 20 ns to 60 us.
std::vector<double> default_t1_grid();
std::vector<double> default_delay_grid();

Bundle make_bundle(const BundleSpec& spec, unsigned threads = 1);

}  // namespace qpdyn::synth

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

#include "qpdyn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qpdyn/errors.hpp"
#include "qpdyn/fit.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn {

std::string_view to_string(SweepSource s) {
  return s == SweepSource::Power ? "power" : "length";
}

SweepSource parse_sweep_source(std::string_view s) {
  if (s == "power") return SweepSource::Power;
  if (s == "length") return SweepSource::Length;
  throw DomainError("unknown sweep source '" + std::string(s) + "'");
}

}  // namespace qpdyn

namespace qpdyn::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double clip_population(double v) { return std::clamp(v, -0.1, 1.1); }

MeasurementTrace make_trace(Protocol protocol, std::span<const double> grid,
                            const NoiseModel& noise, std::uint64_t seed) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DomainError("generator: grid must be strictly increasing");
  }
  if (noise.n_avg <= 0) throw DomainError("noise: n_avg must be positive");
  MeasurementTrace tr;
  tr.protocol = protocol;
  tr.times.assign(grid.begin(), grid.end());
  tr.values.resize(grid.size());
  const double sigma = noise.effective_sigma() > 0.0 ? noise.effective_sigma() : 1.0;
  tr.sigma.assign(grid.size(), sigma);
  tr.seed = seed;
  tr.meta["noise_sigma_read"] = format_double(noise.sigma_read);
  tr.meta["noise_n_avg"] = std::to_string(noise.n_avg);
  tr.meta["noise_enabled"] = noise.enabled ? "1" : "0";
  return tr;
}

void add_noise(MeasurementTrace& tr, const NoiseModel& noise) {
  if (!noise.enabled || noise.effective_sigma() == 0.0) return;
  RngStream rng(tr.seed, 0);
  for (auto& v : tr.values) v += rng.normal(0.0, noise.effective_sigma());
}

void put(std::map<std::string, std::string>& meta, const std::string& key, double v) {
  meta[key] = format_double(v);
}

}  // namespace

double EnergyMap::x_in(double energy) const {
  if (!(energy >= 0.0)) throw DomainError("energy map: energy must be >= 0");
  if (kind == Kind::Linear || energy <= plateau_start) return mu_pulse * energy;
  const double plateau = mu_pulse * plateau_start;
  if (energy <= plateau_end) return plateau;
  return plateau + mu_after * (energy - plateau_end);
}

MeasurementTrace gen_t1_trace_at_rate(double gamma, std::span<const double> grid,
                                      const NoiseModel& noise, std::uint64_t seed) {
  if (!(gamma >= 0.0)) throw DomainError("gen_t1_trace: rate must be >= 0");
  MeasurementTrace tr = make_trace(Protocol::T1Decay, grid, noise, seed);
  for (std::size_t i = 0; i < grid.size(); ++i) tr.values[i] = std::exp(-gamma * grid[i]);
  add_noise(tr, noise);
  for (auto& v : tr.values) v = clip_population(v);
  put(tr.meta, "gamma_true", gamma);
  return tr;
}

MeasurementTrace gen_t1_trace(const DeviceParams& dev, double x_qp, std::span<const double> grid,
                              const NoiseModel& noise, std::uint64_t seed) {
  MeasurementTrace tr = gen_t1_trace_at_rate(decay_rate(dev, x_qp), grid, noise, seed);
  put(tr.meta, "x_qp", x_qp);
  return tr;
}

MeasurementTrace gen_ramsey_trace(const DeviceParams& dev, double x_qp, double t2_star,
                                  double detune, std::span<const double> grid,
                                  const NoiseModel& noise, std::uint64_t seed, double slope_scale) {
  if (!(t2_star > 0.0)) throw DomainError("gen_ramsey_trace: T2* must be positive");
  const double f = detune + freq_shift(dev, x_qp, slope_scale) / kTwoPi;
  MeasurementTrace tr = make_trace(Protocol::Ramsey, grid, noise, seed);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    tr.values[i] = 0.5 * (1.0 + std::exp(-t / t2_star) * std::cos(kTwoPi * f * t));
  }
  add_noise(tr, noise);
  for (auto& v : tr.values) v = clip_population(v);
  put(tr.meta, "x_qp", x_qp);
  put(tr.meta, "t2_star_true", t2_star);
  put(tr.meta, "detune_nominal", detune);
  put(tr.meta, "detune_true", f);
  return tr;
}

RecoveryRun gen_recovery_sweep(const DeviceParams& dev, const QpDynamics& dyn,
                               const OpticalDrive& drive, const EnergyMap& map,
                               std::span<const double> delays, std::span<const double> t1_grid,
                               const NoiseModel& noise, std::uint64_t seed,
                               std::optional<double> x_in) {
  dev.validate();
  drive.validate();
  for (std::size_t i = 1; i < delays.size(); ++i) {
    if (!(delays[i] > delays[i - 1])) throw DomainError("recovery sweep: delays must increase");
  }
  QpDynamics d = dyn;
  d.x_in = x_in ? *x_in : map.x_in(drive.pulse_energy());
  if (!(d.x_in >= 0.0)) throw DomainError("recovery sweep: x_in must be >= 0");

  RecoveryRun run;
  run.drive = drive;
  run.delays.assign(delays.begin(), delays.end());
  put(run.meta, "x_in_true", d.x_in);
  put(run.meta, "s_true", d.s);
  put(run.meta, "r_true", d.r);
  put(run.meta, "gamma0_true", dev.gamma0);
  run.meta["energy_map"] = map.kind == EnergyMap::Kind::Linear ? "linear" : "piecewise-phenomenological";
  run.meta["seed"] = std::to_string(seed);

  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double gamma = gamma_recovery_at(dev, d, delays[i]);
    MeasurementTrace tr = gen_t1_trace_at_rate(gamma, t1_grid, noise, derive_seed(seed, i));
    put(tr.meta, "delay_s", delays[i]);
    run.traces.push_back(std::move(tr));
  }
  return run;
}

std::vector<RecoveryRun> gen_pulselen_sweep(const DeviceParams& dev, const QpDynamics& dyn,
                                            const OpticalDrive& drive, const EnergyMap& map,
                                            std::span<const double> pulse_lengths,
                                            std::span<const double> delays,
                                            std::span<const double> t1_grid,
                                            const NoiseModel& noise, std::uint64_t seed) {
  std::vector<RecoveryRun> out;
  for (std::size_t k = 0; k < pulse_lengths.size(); ++k) {
    OpticalDrive d = drive;
    d.pulse_len = pulse_lengths[k];
    RecoveryRun run = gen_recovery_sweep(dev, dyn, d, map, delays, t1_grid, noise, derive_seed(seed, k));
    run.source = SweepSource::Length;
    out.push_back(std::move(run));
  }
  return out;
}

CwSweep gen_cw_sweep(const DeviceParams& dev, const OpticalDrive& drive,
                     std::span<const double> powers, const CwOptions& opt,
                     const NoiseModel& noise, std::uint64_t seed) {
  dev.validate();
  if (opt.repeats <= 0) throw DomainError("cw sweep: repeats must be positive");
  CwSweep sweep;
  sweep.drive = drive;
  sweep.seed = seed;
  put(sweep.meta, "mu_true_per_w", drive.mu);
  put(sweep.meta, "t_phi_true", opt.t_phi);
  // An explicit pull coefficient overrides the model slope.
  double slope_scale = opt.slope_scale;
  if (drive.lambda_shift != 0.0) {
    if (!(drive.mu > 0.0)) throw DomainError("cw sweep: lambda_shift needs a positive mu");
    slope_scale = drive.lambda_shift / (kShiftPrefactor * qp_coupling(dev) * drive.mu);
  }
  put(sweep.meta, "slope_scale_true", slope_scale);
  put(sweep.meta, "detune_nominal", opt.detune);

  for (std::size_t k = 0; k < powers.size(); ++k) {
    if (!(powers[k] >= 0.0)) throw DomainError("cw sweep: powers must be >= 0");
    OpticalDrive d = drive;
    d.power = powers[k];
    const double gamma = cw_gamma(dev, d);
    const double x_qp = drive.mu * powers[k];
    const double dw = freq_shift(dev, x_qp, slope_scale);
    const double t1 = 1.0 / gamma;
    const double t2 = compose_t2_star(t1, opt.t_phi);

    CwRow row;
    row.power = powers[k];
    if (!noise.enabled) {
      row = CwRow{powers[k], t1, 0.0, t2, 0.0, dw, 0.0, opt.repeats};
      sweep.rows.push_back(row);
      continue;
    }

    const auto t1_grid = linspace(0.0, 5.0 * t1, opt.t1_points);
    const auto ramsey_grid = linspace(0.0, 3.0 * t2, opt.ramsey_points);
    const double f = opt.detune + dw / kTwoPi;
    if (!(f > 0.0) || f * (ramsey_grid[1] - ramsey_grid[0]) > 0.4) {
      throw DomainError("cw sweep: frequency pull leaves the Ramsey fringe unresolvable; "
                        "raise the nominal detuning or lower the power");
    }
    std::vector<double> t1s, t2s, dws;
    const std::uint64_t point_seed = derive_seed(seed, k);
    for (int rep = 0; rep < opt.repeats; ++rep) {
      const auto rep_seed = derive_seed(point_seed, static_cast<std::uint64_t>(rep));
      try {
        auto t1_trace = gen_t1_trace_at_rate(gamma, t1_grid, noise, derive_seed(rep_seed, 0));
        auto ramsey = gen_ramsey_trace(dev, x_qp, t2, opt.detune, ramsey_grid, noise,
                                       derive_seed(rep_seed, 1), slope_scale);
        const auto e = fit::fit_exponential(t1_trace);
        const auto r = fit::fit_ramsey(ramsey);
        if (!e.result.converged || !r.result.converged) continue;
        t1s.push_back(1.0 / e.gamma);
        t2s.push_back(r.t2_star);
        dws.push_back(kTwoPi * (r.detune - opt.detune));
      } catch (const std::runtime_error&) {
        // A failed repetition is dropped, as an unfittable scan would be.
      }
    }
    auto mean_std = [](const std::vector<double>& v) {
      if (v.empty()) return std::pair{std::nan(""), std::nan("")};
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::pair{m, sd};
    };
    if (t1s.empty()) continue;
    std::tie(row.t1, row.t1_std) = mean_std(t1s);
    std::tie(row.t2_star, row.t2_star_std) = mean_std(t2s);
    std::tie(row.dw, row.dw_std) = mean_std(dws);
    row.n_rep = static_cast<int>(t1s.size());
    sweep.rows.push_back(row);
  }
  return sweep;
}

MeasurementTrace gen_ef_rabi(const DeviceParams& dev, double temp, bool with_pi_pulse,
                             std::span<const double> amplitudes, const NoiseModel& noise,
                             std::uint64_t seed, double pi_amplitude) {
  if (!(temp > 0.0)) throw DomainError("gen_ef_rabi: temperature must be positive");
  const double p_e = excited_population(dev, temp);
  const double pop = with_pi_pulse ? 1.0 - p_e : p_e;
  MeasurementTrace tr = make_trace(Protocol::EfRabi, amplitudes, noise, seed);
  tr.x_unit = "rel";
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double s = std::sin(std::numbers::pi * amplitudes[i] / (2.0 * pi_amplitude));
    tr.values[i] = pop * s * s;
  }
  add_noise(tr, noise);
  for (auto& v : tr.values) v = clip_population(v);
  put(tr.meta, "temperature_true", temp);
  put(tr.meta, "p_e_true", p_e);
  put(tr.meta, "pi_amplitude", pi_amplitude);
  tr.meta["with_pi_pulse"] = with_pi_pulse ? "1" : "0";
  return tr;
}

std::vector<double> default_t1_grid() {
  std::vector<double> grid{0.0};
  for (double t : geomspace(20e-9, 60e-6, 59)) grid.push_back(t);
  return grid;
}

std::vector<double> default_delay_grid() { return linspace(10e-6, 1.0e-3, 100); }

BundleSpec golden_spec() {
  BundleSpec spec;
  spec.dyn = QpDynamics::with_steady_state(9.0e3, 0.0, 0.0, 0.0);
  // Conversion constants per watt (1.75e-6, 1.61e-5 and 2.96e-8 per nW).
  spec.mu_cw = {{BeamPosition::A, 1.75e3}, {BeamPosition::B, 1.61e4}, {BeamPosition::C, 29.6}};
  // 100 nW for 10 us injects 1e-4.
  spec.energy_map = EnergyMap::linear(1.0e8);
  // Eight powers below 100 nW, then up to x_in = 1e-2.
  spec.recovery_powers = {20e-9,  30e-9,  40e-9, 50e-9, 60e-9, 70e-9, 80e-9,
                          95e-9,  200e-9, 500e-9, 1e-6, 2e-6,  5e-6,  10e-6};
  spec.pulse_len = 10e-6;
  // Short pulses reach down to x_in = 1e-6.
  spec.pulse_lengths = {10e-9, 30e-9, 0.1e-6, 0.3e-6, 1e-6, 3e-6, 10e-6, 30e-6};
  spec.length_sweep_power = 1e-6;
  spec.delays = default_delay_grid();
  spec.t1_grid = default_t1_grid();
  std::vector<double> c_powers{0.0};
  for (double p : geomspace(20e-9, 2e-6, 11)) c_powers.push_back(p);
  for (auto [pos, mu] : spec.mu_cw) {
    std::vector<double> grid;
    for (double p : c_powers) grid.push_back(p * spec.mu_cw.at(BeamPosition::C) / mu);
    spec.cw_powers[pos] = grid;
  }
  spec.temperature = 0.165;
  spec.rabi_amplitudes = linspace(0.0, 2.0, 41);
  spec.noise = NoiseModel{0.1, 100, true};
  spec.seed = 20240611;
  return spec;
}

Bundle make_bundle(const BundleSpec& spec, unsigned threads) {
  spec.device.validate();
  Bundle b;
  b.device = spec.device;
  b.seed = spec.seed;
  put(b.meta, "s_true", spec.dyn.s);
  put(b.meta, "r_true", spec.dyn.r);
  put(b.meta, "mu_pulse_per_j", spec.energy_map.mu_pulse);
  put(b.meta, "pulse_len_s", spec.pulse_len);

  struct Task {
    OpticalDrive drive;
    SweepSource source;
    std::string id;
  };
  std::vector<Task> tasks;
  auto mu_or_zero = [&](BeamPosition p) {
    auto it = spec.mu_cw.find(p);
    return it == spec.mu_cw.end() ? 0.0 : it->second;
  };
  for (std::size_t i = 0; i < spec.recovery_powers.size(); ++i) {
    OpticalDrive d{spec.pulse_position, spec.recovery_powers[i], spec.pulse_len,
                   mu_or_zero(spec.pulse_position), 0.0};
    char id[32];
    std::snprintf(id, sizeof id, "power_%02zu", i);
    tasks.push_back({d, SweepSource::Power, id});
  }
  for (std::size_t i = 0; i < spec.pulse_lengths.size(); ++i) {
    OpticalDrive d{spec.pulse_position, spec.length_sweep_power, spec.pulse_lengths[i],
                   mu_or_zero(spec.pulse_position), 0.0};
    char id[32];
    std::snprintf(id, sizeof id, "length_%02zu", i);
    tasks.push_back({d, SweepSource::Length, id});
  }

  b.recovery.resize(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    RecoveryRun run = gen_recovery_sweep(spec.device, spec.dyn, tasks[i].drive, spec.energy_map,
                                         spec.delays, spec.t1_grid, spec.noise,
                                         derive_seed(spec.seed, i));
    run.id = tasks[i].id;
    run.source = tasks[i].source;
    b.recovery[i] = std::move(run);
  });

  for (const auto& [pos, powers] : spec.cw_powers) {
    const auto lam = spec.lambda_shift.find(pos);
    OpticalDrive d{pos, 0.0, 0.0, mu_or_zero(pos), lam == spec.lambda_shift.end() ? 0.0 : lam->second};
    CwSweep sw = gen_cw_sweep(spec.device, d, powers, spec.cw, spec.noise,
                              derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(pos)));
    sw.id = "cw_" + std::string(to_string(pos));
    b.cw.push_back(std::move(sw));
  }

  if (spec.temperature > 0.0 && !spec.rabi_amplitudes.empty()) {
    EfRabiPair pair;
    pair.id = "efrabi_0";
    pair.without_pi = gen_ef_rabi(spec.device, spec.temperature, false, spec.rabi_amplitudes,
                                  spec.noise, derive_seed(spec.seed, 2000));
    pair.with_pi = gen_ef_rabi(spec.device, spec.temperature, true, spec.rabi_amplitudes,
                               spec.noise, derive_seed(spec.seed, 2001));
    b.ef_rabi.push_back(std::move(pair));
  }
  return b;
}

}  // namespace qpdyn::synth

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

#include <cmath>

#include "doctest.h"
#include "qpdyn/errors.hpp"
#include "qpdyn/synth.hpp"
#include "qpdyn/util.hpp"

using namespace qpdyn;
using namespace qpdyn::synth;

namespace {

// A small campaign that generates in well under a second.
BundleSpec small_spec() {
  BundleSpec spec = golden_spec();
  spec.recovery_powers = {50e-9, 1e-6};
  spec.pulse_lengths = {1e-6};
  spec.delays = linspace(10e-6, 1e-3, 20);
  for (auto& [pos, p] : spec.cw_powers) p.resize(4);
  spec.cw.repeats = 2;
  spec.seed = 42;
  return spec;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("noiseless T1 trace is the exact exponential") {
  DeviceParams dev;
  const auto grid = default_t1_grid();
  const auto tr = gen_t1_trace(dev, 1e-5, grid, NoiseModel::off(), 1);
  const double gamma = decay_rate(dev, 1e-5);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(tr.values[i] == doctest::Approx(std::exp(-gamma * grid[i])).epsilon(1e-15));
  }
  CHECK_NOTHROW(tr.validate());
}

TEST_CASE("noisy values stay in the clipped range") {
  NoiseModel loud{1.0, 1, true};
  const auto tr = gen_t1_trace_at_rate(1e5, linspace(0.0, 50e-6, 200), loud, 9);
  for (double v : tr.values) {
    CHECK(v >= -0.1);
    CHECK(v <= 1.1);
  }
}

TEST_CASE("same seed gives identical traces, different seeds differ") {
  const auto grid = linspace(0.0, 50e-6, 50);
  NoiseModel n;
  const auto a = gen_t1_trace_at_rate(1e5, grid, n, 11);
  const auto b = gen_t1_trace_at_rate(1e5, grid, n, 11);
  const auto c = gen_t1_trace_at_rate(1e5, grid, n, 12);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
}

TEST_CASE("ramsey fringe frequency includes the pull") {
  DeviceParams dev;
  const auto tr = gen_ramsey_trace(dev, 1e-6, 10e-6, 3e6, linspace(0.0, 30e-6, 100), NoiseModel::off(), 1);
  CHECK(tr.meta_double("detune_true") ==
        doctest::Approx(3e6 + freq_shift(dev, 1e-6) / (2 * M_PI)).epsilon(1e-14));
  CHECK(tr.values.front() == doctest::Approx(1.0));
}

TEST_CASE("energy maps") {
  const auto lin = EnergyMap::linear(1e8);
  CHECK(lin.x_in(1e-12) == doctest::Approx(1e-4));
  EnergyMap pw{EnergyMap::Kind::Piecewise, 1e8, 1e-12, 5e-12, 1e7};
  CHECK(pw.x_in(0.5e-12) == doctest::Approx(0.5e-4));
  CHECK(pw.x_in(3e-12) == doctest::Approx(1e-4));
  CHECK(pw.x_in(6e-12) == doctest::Approx(1e-4 + 1e7 * 1e-12));
  CHECK_THROWS_AS(lin.x_in(-1.0), DomainError);
}

TEST_CASE("recovery sweep follows the model") {
  DeviceParams dev;
  const auto dyn = QpDynamics::with_steady_state(9e3, 0.0, 0.0, 0.0);
  OpticalDrive d{BeamPosition::A, 1e-6, 10e-6, 1.75e3, 0.0};
  const auto delays = linspace(10e-6, 1e-3, 10);
  const auto run = gen_recovery_sweep(dev, dyn, d, EnergyMap::linear(1e8), delays, default_t1_grid(),
                                      NoiseModel::off(), 3);
  REQUIRE(run.traces.size() == delays.size());
  CHECK(std::stod(run.meta.at("x_in_true")) == doctest::Approx(1e-3));
  auto dd = dyn;
  dd.x_in = 1e-3;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    CHECK(run.traces[i].meta_double("gamma_true") ==
          doctest::Approx(gamma_recovery_at(dev, dd, delays[i])).epsilon(1e-14));
  }
}

TEST_CASE("noiseless cw sweep holds exact model rows") {
  DeviceParams dev;
  OpticalDrive d{BeamPosition::C, 0.0, 0.0, 29.6, 0.0};
  CwOptions opt;
  const std::vector<double> powers{0.0, 1e-6, 2e-6};
  const auto sw = gen_cw_sweep(dev, d, powers, opt, NoiseModel::off(), 1);
  REQUIRE(sw.rows.size() == 3);
  for (const auto& row : sw.rows) {
    OpticalDrive dp = d;
    dp.power = row.power;
    CHECK(1.0 / row.t1 == doctest::Approx(cw_gamma(dev, dp)).epsilon(1e-14));
    CHECK(row.t2_star == doctest::Approx(compose_t2_star(row.t1, opt.t_phi)).epsilon(1e-14));
  }
}

TEST_CASE("lambda override sets the effective pull scale") {
  DeviceParams dev;
  const double mu = 29.6;
  const double lambda = 0.83 * kShiftPrefactor * qp_coupling(dev) * mu;
  OpticalDrive d{BeamPosition::C, 0.0, 0.0, mu, lambda};
  const std::vector<double> powers{0.0, 1e-6};
  const auto sw = gen_cw_sweep(dev, d, powers, CwOptions{}, NoiseModel::off(), 1);
  CHECK(std::stod(sw.meta.at("slope_scale_true")) == doctest::Approx(0.83));
  CHECK(sw.rows[1].dw == doctest::Approx(-lambda * 1e-6));
}

TEST_CASE("e-f rabi amplitudes carry the populations") {
  DeviceParams dev;
  const auto amps = linspace(0.0, 2.0, 21);
  const auto a = gen_ef_rabi(dev, 0.165, false, amps, NoiseModel::off(), 1);
  const auto b = gen_ef_rabi(dev, 0.165, true, amps, NoiseModel::off(), 2);
  const double p = excited_population(dev, 0.165);
  CHECK(a.values[10] == doctest::Approx(p));
  CHECK(b.values[10] == doctest::Approx(1.0 - p));
}

TEST_CASE("bundle generation is deterministic and thread independent") {
  const auto spec = small_spec();
  const Bundle a = make_bundle(spec, 1);
  const Bundle b = make_bundle(spec, 4);
  REQUIRE(a.recovery.size() == 3);
  REQUIRE(a.cw.size() == 3);
  REQUIRE(a.ef_rabi.size() == 1);
  for (std::size_t i = 0; i < a.recovery.size(); ++i) {
    for (std::size_t k = 0; k < a.recovery[i].traces.size(); ++k) {
      CHECK(a.recovery[i].traces[k].values == b.recovery[i].traces[k].values);
    }
  }
  CHECK(a.cw[0].rows.size() == b.cw[0].rows.size());
  CHECK(a.cw[1].rows[2].t1 == b.cw[1].rows[2].t1);
}

TEST_CASE("each task can be regenerated alone") {
  const auto spec = small_spec();
  const Bundle full = make_bundle(spec);
  const auto alone = gen_recovery_sweep(spec.device, spec.dyn, full.recovery[1].drive, spec.energy_map,
                                        spec.delays, spec.t1_grid, spec.noise, derive_seed(spec.seed, 1));
  CHECK(alone.traces[3].values == full.recovery[1].traces[3].values);
}

TEST_CASE("golden campaign layout") {
  const auto spec = golden_spec();
  int low = 0;
  for (double p : spec.recovery_powers) low += p < 100e-9;
  CHECK(low == 8);
  const double lo = spec.energy_map.x_in(spec.length_sweep_power * spec.pulse_lengths.front());
  const double hi = spec.energy_map.x_in(spec.recovery_powers.back() * spec.pulse_len);
  CHECK(lo == doctest::Approx(1e-6));
  CHECK(hi == doctest::Approx(1e-2));
}

}

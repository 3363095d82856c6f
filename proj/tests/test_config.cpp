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

#include <string>

#include "doctest.h"
#include "qpdyn/config.hpp"
#include "qpdyn/errors.hpp"

using namespace qpdyn;

TEST_SUITE("config") {

TEST_CASE("empty config gives the defaults") {
  const auto cfg = parse_config("", "mem");
  const RunConfig def;
  CHECK(cfg.seed == def.seed);
  CHECK(canonical_config(cfg) == canonical_config(def));
  CHECK(cfg.bundle.dyn.s == doctest::Approx(9e3));
}

TEST_CASE("units in key names are converted to SI") {
  const auto cfg = parse_config(
      "[dynamics]\ns_khz = 12\nr_mhz = 0.5\n"
      "[drive.B]\nmu_per_nw = 2e-5\n"
      "[recovery]\npowers_nw = 10, 20\n"
      "[scene]\nwaist_um = 50\n",
      "mem");
  CHECK(cfg.bundle.dyn.s == doctest::Approx(12e3));
  CHECK(cfg.bundle.dyn.r == doctest::Approx(0.5e6));
  CHECK(cfg.bundle.mu_cw.at(BeamPosition::B) == doctest::Approx(2e4));
  REQUIRE(cfg.bundle.recovery_powers.size() == 2);
  CHECK(cfg.bundle.recovery_powers[1] == doctest::Approx(20e-9));
  CHECK(cfg.scene.beam.waist == doctest::Approx(50e-6));
}

TEST_CASE("unknown sections, keys and bad values are rejected") {
  CHECK_THROWS_AS(parse_config("[nope]\na = 1\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_config("[dynamics]\ns_hz = 9000\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_config("[dynamics]\ns_khz = fast\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_config("[dynamics]\ns_khz = -1\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_config("s_khz = 9\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\nthreads = 0\n", "mem"), ConfigError);
}

TEST_CASE("canonical form round trips") {
  const auto cfg = parse_config("[pulse]\nlength_us = 5\n[pipeline]\nr_grid_mhz = 0, 1, 2\n", "mem");
  const auto again = parse_config(canonical_config(cfg), "canon");
  CHECK(canonical_config(again) == canonical_config(cfg));
  CHECK(config_hash(again) == config_hash(cfg));
}

TEST_CASE("hash ignores the run section and tracks physics") {
  const auto base = parse_config("", "mem");
  CHECK(config_hash(parse_config("[run]\nseed = 5\nout_dir = elsewhere\n", "mem")) == config_hash(base));
  CHECK(config_hash(parse_config("[dynamics]\ns_khz = 8\n", "mem")) != config_hash(base));
}

TEST_CASE("bundle spec rebuilds grids from the knobs") {
  const auto cfg = parse_config("[recovery]\ndelay_points = 7\nt1_points = 9\n", "mem");
  const auto spec = cfg.bundle_spec();
  CHECK(spec.delays.size() == 7);
  CHECK(spec.t1_grid.size() == 10);
  CHECK(spec.t1_grid.front() == 0.0);
  REQUIRE(spec.cw_powers.count(BeamPosition::A) == 1);
  // CW powers are scaled so every position reaches the same density.
  const double xa = spec.cw_powers.at(BeamPosition::A).back() * spec.mu_cw.at(BeamPosition::A);
  const double xc = spec.cw_powers.at(BeamPosition::C).back() * spec.mu_cw.at(BeamPosition::C);
  CHECK(xa == doctest::Approx(xc));
}

}

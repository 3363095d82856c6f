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

// Run configuration: an INI file whose keys carry their unit in the name
// (power_nw, s_khz, ...). Every key has a default; unknown sections or keys
// are rejected before any work starts.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qpdyn/imaging.hpp"
#include "qpdyn/model.hpp"
#include "qpdyn/pipeline.hpp"
#include "qpdyn/synth.hpp"

namespace qpdyn {

struct SceneConfig {
  double aperture_center = 0.0;     // m
  double aperture_width = 500e-6;   // m
  bool pad = true;
  imaging::Rect pad_rect{0.0, 0.0, 350e-6, 300e-6};
  bool antenna = false;
  imaging::Disk antenna_disk{0.0, 600e-6, 100e-6};
  imaging::BeamSpec beam;
  imaging::GridSpec grid;
  double threshold = 0.5;
  double diffusion_const = kDefaultDiffusionConst;  // m^2/s

  imaging::SceneGeometry geometry() const;
};

struct RunConfig {
  std::uint64_t seed = 20240611;
  std::string out_dir = "out";
  unsigned threads = 1;

  /// Generator settings; delays, T1 grid and CW powers are rebuilt from the
  /// knobs below by bundle_spec().
  synth::BundleSpec bundle = synth::golden_spec();
  double delay_min = 10e-6, delay_max = 1e-3;
  std::size_t delay_points = 100;
  double t1_min = 20e-9, t1_max = 60e-6;
  std::size_t t1_points = 59;  // plus t = 0
  std::vector<double> cw_reference_powers;  // W at position C; others scaled by mu_C / mu
  std::size_t rabi_points = 41;
  double rabi_max_amplitude = 2.0;

  pipeline::PipelineConfig pipeline;
  SceneConfig scene;

  RunConfig();
  synth::BundleSpec bundle_spec() const;
};

/// Parses INI text over the defaults. `label` names the source in errors.
RunConfig parse_config(std::string_view text, const std::string& label);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its effective value, in a fixed order.
std::string canonical_config(const RunConfig& cfg);
/// Hash of the canonical form with the run section (seed, paths, threads) left out.
std::string config_hash(const RunConfig& cfg);

}  // namespace qpdyn

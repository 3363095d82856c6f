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

// Containers for a measurement campaign: pulsed recovery runs, CW sweeps and
// e-f Rabi thermometry pairs. Produced by the generators, read back from
// disk by dataset_io and consumed by the pipeline.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qpdyn/model.hpp"
#include "qpdyn/trace.hpp"

namespace qpdyn {

/// Which knob a pulsed run belongs to: the power sweep or the length sweep.
enum class SweepSource { Power, Length };

std::string_view to_string(SweepSource s);
SweepSource parse_sweep_source(std::string_view s);

/// T1 traces taken at a series of delays after one optical pulse setting.
struct RecoveryRun {
  std::string id;
  SweepSource source = SweepSource::Power;
  OpticalDrive drive;
  std::vector<double> delays;              // s, strictly increasing
  std::vector<MeasurementTrace> traces;    // one T1 trace per delay
  std::map<std::string, std::string> meta; // generating truth, if any

  double energy() const { return drive.pulse_energy(); }
};

struct CwRow {
  double power = 0.0;       // W
  double t1 = 0.0;          // s
  double t1_std = 0.0;
  double t2_star = 0.0;     // s
  double t2_star_std = 0.0;
  double dw = 0.0;          // rad/s, shift from the laser-off frequency
  double dw_std = 0.0;
  int n_rep = 0;
};

struct CwSweep {
  std::string id;
  OpticalDrive drive;  // position and generating mu; power unused
  std::vector<CwRow> rows;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
};

struct EfRabiPair {
  std::string id;
  MeasurementTrace without_pi;
  MeasurementTrace with_pi;
};

struct Bundle {
  DeviceParams device;
  std::vector<RecoveryRun> recovery;
  std::vector<CwSweep> cw;
  std::vector<EfRabiPair> ef_rabi;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
  std::vector<std::string> warnings;  // loader diagnostics (skipped files, ...)

  bool empty() const { return recovery.empty() && cw.empty() && ef_rabi.empty(); }
};

}  // namespace qpdyn

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

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace qpdyn {

enum class Protocol { T1Decay, Ramsey, RecoverySweep, CwPowerSweep, PulseLenSweep, EfRabi };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view s);

/// One measured (or simulated) curve. `times` holds the swept variable; for
/// non-time sweeps `x_unit` names its unit.
struct MeasurementTrace {
  Protocol protocol = Protocol::T1Decay;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> sigma;
  std::uint64_t seed = 0;
  std::string x_unit = "s";
  /// Snapshot of generating parameters and bundle bookkeeping (key=value).
  std::map<std::string, std::string> meta;

  std::size_t size() const { return times.size(); }

  /// Throws DomainError on non-increasing times, mismatched columns,
  /// non-finite values or non-positive sigma.
  void validate() const;

  double meta_double(const std::string& key) const;
  double meta_double(const std::string& key, double fallback) const;
};

/// Gaussian noise on averaged populations.
struct NoiseModel {
  double sigma_read = 0.1;  // single-shot deviation
  int n_avg = 100;          // averages per point
  bool enabled = true;

  double effective_sigma() const;
  static NoiseModel off(double sigma_read = 0.1, int n_avg = 100) {
    return NoiseModel{sigma_read, n_avg, false};
  }
};

/// Independent random stream keyed by (seed, stream index), so any task can
/// be generated alone and in any order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  double normal(double mean, double stddev);
  double uniform();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace qpdyn

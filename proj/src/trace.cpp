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

#include "qpdyn/trace.hpp"

#include <charconv>
#include <cmath>

#include "qpdyn/errors.hpp"

namespace qpdyn {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::T1Decay: return "T1Decay";
    case Protocol::Ramsey: return "Ramsey";
    case Protocol::RecoverySweep: return "RecoverySweep";
    case Protocol::CwPowerSweep: return "CwPowerSweep";
    case Protocol::PulseLenSweep: return "PulseLenSweep";
    case Protocol::EfRabi: return "EfRabi";
  }
  return "?";
}

Protocol parse_protocol(std::string_view s) {
  for (auto p : {Protocol::T1Decay, Protocol::Ramsey, Protocol::RecoverySweep,
                 Protocol::CwPowerSweep, Protocol::PulseLenSweep, Protocol::EfRabi}) {
    if (to_string(p) == s) return p;
  }
  throw DomainError("unknown protocol '" + std::string(s) + "'");
}

void MeasurementTrace::validate() const {
  if (values.size() != times.size() || sigma.size() != times.size()) {
    throw DomainError("trace: column lengths differ");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
      throw DomainError("trace: non-finite entry at row " + std::to_string(i));
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw DomainError("trace: sweep values must be strictly increasing");
    }
    if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
      throw DomainError("trace: sigma must be positive at row " + std::to_string(i));
    }
  }
}

double MeasurementTrace::meta_double(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DomainError("trace: missing metadata '" + key + "'");
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DomainError("trace: metadata '" + key + "' is not a number");
  }
}

double MeasurementTrace::meta_double(const std::string& key, double fallback) const {
  return meta.count(key) ? meta_double(key) : fallback;
}

double NoiseModel::effective_sigma() const {
  return sigma_read / std::sqrt(static_cast<double>(n_avg));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  engine_.seed(seq);
}

double RngStream::normal(double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

double RngStream::uniform() {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

}  // namespace qpdyn

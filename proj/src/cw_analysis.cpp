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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "qpdyn/errors.hpp"
#include "qpdyn/pipeline.hpp"

namespace qpdyn::pipeline {

namespace {

double rel_quadrature(double a, double da, double b, double db) {
  const double ra = a != 0.0 ? da / a : 0.0;
  const double rb = b != 0.0 ? db / b : 0.0;
  return std::hypot(ra, rb);
}

}  // namespace

CwAnalysis analyze_cw(const CwSweep& sweep, const DeviceParams& dev, const PipelineConfig& cfg) {
  if (sweep.rows.size() < 2) {
    throw InsufficientDataError("CW sweep '" + sweep.id + "': need at least 2 power points");
  }
  const double coupling = qp_coupling(dev);
  CwAnalysis out;
  out.id = sweep.id;
  out.position = sweep.drive.position;
  out.rows = sweep.rows;

  const double floor = std::sqrt(cfg.variance_floor);
  std::vector<double> p, g, sg;
  for (const auto& row : sweep.rows) {
    if (!(row.t1 > 0.0)) throw DomainError("CW sweep '" + sweep.id + "': T1 must be positive");
    const double gamma = 1.0 / row.t1;
    p.push_back(row.power);
    g.push_back(gamma);
    sg.push_back(std::max(row.t1_std / (row.t1 * row.t1), floor * gamma));
  }
  out.gamma_fit = fit::fit_linear_weighted(p, g, sg);
  out.mu = out.gamma_fit.slope / coupling;
  out.mu_err = out.gamma_fit.slope_err / coupling;
  out.gamma0 = out.gamma_fit.intercept;
  out.gamma0_err = out.gamma_fit.intercept_err;

  double p_max = 0.0;
  for (const auto& row : sweep.rows) p_max = std::max(p_max, row.power);
  double top_sum = 0.0;
  std::size_t top_n = 0;
  for (const auto& row : sweep.rows) {
    DephasingRow d;
    d.power = row.power;
    d.t1 = row.t1;
    d.t2_star = row.t2_star;
    d.t2_over_2t1 = row.t2_star / (2.0 * row.t1);
    try {
      d.t_phi = dephasing_decompose(row.t1, row.t2_star).t_phi;
    } catch (const InfeasibleDecompositionError&) {
      d.feasible = false;
      ++out.infeasible_points;
    }
    if (p_max > 0.0 && row.power >= 0.1 * p_max) {
      top_sum += d.t2_over_2t1;
      ++top_n;
    }
    out.dephasing.push_back(d);
  }
  if (out.infeasible_points > 0) {
    out.warnings.push_back(std::to_string(out.infeasible_points) + " point(s) with T2* > 2 T1");
  }
  if (top_n > 0) out.top_decade_t2_ratio = top_sum / static_cast<double>(top_n);

  std::vector<double> w, sw;
  double w_scale = 0.0;
  for (const auto& row : sweep.rows) w_scale = std::max(w_scale, std::abs(row.dw));
  for (const auto& row : sweep.rows) {
    w.push_back(row.dw);
    sw.push_back(std::max({row.dw_std, 1e-3 * w_scale, 1e-300}));
  }
  if (w_scale > 0.0) {
    out.shift_fit = fit::fit_linear_weighted(p, w, sw);
    out.lambda = -out.shift_fit->slope;
    out.lambda_err = out.shift_fit->slope_err;
    out.shift_theory_slope = -cfg.shift_prefactor * coupling * out.mu;
    if (out.shift_theory_slope != 0.0) {
      out.shift_ratio = out.shift_fit->slope / out.shift_theory_slope;
      out.shift_ratio_err = std::abs(out.shift_ratio) *
                            rel_quadrature(out.shift_fit->slope, out.shift_fit->slope_err,
                                           out.mu, out.mu_err);
    }
  } else {
    out.warnings.push_back("no frequency shift recorded");
  }
  return out;
}

void collapse_check(std::vector<CwAnalysis>& analyses, const std::vector<CwSweep>& sweeps,
                    BeamPosition reference) {
  if (analyses.size() != sweeps.size()) {
    throw DomainError("collapse_check: analyses and sweeps differ in count");
  }
  const CwAnalysis* ref = nullptr;
  for (const auto& a : analyses) {
    if (a.position == reference) {
      ref = &a;
      break;
    }
  }
  if (ref == nullptr) {
    throw InsufficientDataError("collapse_check: no sweep at reference position " +
                                std::string(to_string(reference)));
  }
  if (!(ref->mu > 0.0)) throw DomainError("collapse_check: reference efficiency is not positive");
  const double ref_mu = ref->mu;
  const double ref_mu_err = ref->mu_err;
  const double ref_g0 = ref->gamma0;
  const double ref_slope = ref->gamma_fit.slope;
  for (std::size_t i = 0; i < analyses.size(); ++i) {
    auto& a = analyses[i];
    a.ratio_to_reference = a.mu / ref_mu;
    a.ratio_to_reference_err =
        std::abs(a.ratio_to_reference) * rel_quadrature(a.mu, a.mu_err, ref_mu, ref_mu_err);
    double dev = 0.0;
    for (const auto& row : sweeps[i].rows) {
      const double gamma = 1.0 / row.t1;
      const double scaled = ref_g0 + ref_slope * row.power * a.ratio_to_reference;
      dev = std::max(dev, std::abs(gamma - scaled) / gamma);
    }
    a.collapse_max_rel_dev = dev;
  }
}

namespace {

// Log-log interpolation of x_in(E) over a sorted series; nullopt outside its span.
std::optional<double> interpolate(std::span<const EnergyPoint> s, double e) {
  if (s.empty() || e < s.front().energy || e > s.back().energy) return std::nullopt;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const auto& a = s[i];
    const auto& b = s[i + 1];
    if (e < a.energy || e > b.energy) continue;
    if (b.energy == a.energy) return 0.5 * (a.x_in + b.x_in);
    if (a.x_in > 0.0 && b.x_in > 0.0 && a.energy > 0.0) {
      const double t = std::log(e / a.energy) / std::log(b.energy / a.energy);
      return a.x_in * std::pow(b.x_in / a.x_in, t);
    }
    const double t = (e - a.energy) / (b.energy - a.energy);
    return a.x_in + t * (b.x_in - a.x_in);
  }
  return s.back().x_in;  // single-point series at exactly that energy
}

}  // namespace

EnergyMerge merge_by_energy(std::span<const EnergyPoint> power_sweep,
                            std::span<const EnergyPoint> length_sweep) {
  auto by_energy = [](const EnergyPoint& a, const EnergyPoint& b) {
    return std::tie(a.energy, a.source, a.id) < std::tie(b.energy, b.source, b.id);
  };
  std::vector<EnergyPoint> ps(power_sweep.begin(), power_sweep.end());
  std::vector<EnergyPoint> ls(length_sweep.begin(), length_sweep.end());
  std::sort(ps.begin(), ps.end(), by_energy);
  std::sort(ls.begin(), ls.end(), by_energy);

  EnergyMerge out;
  out.points = ps;
  out.points.insert(out.points.end(), ls.begin(), ls.end());
  std::sort(out.points.begin(), out.points.end(), by_energy);

  if (ps.empty() || ls.empty()) {
    out.warnings.push_back("only one sweep present; no overlap to compare");
    return out;
  }
  const double lo = std::max(ps.front().energy, ls.front().energy);
  const double hi = std::min(ps.back().energy, ls.back().energy);
  if (lo > hi) {
    out.warnings.push_back("power and length sweeps do not overlap in energy");
    return out;
  }
  out.overlap = std::pair(lo, hi);
  double worst = 0.0;
  auto compare = [&](std::span<const EnergyPoint> pts, std::span<const EnergyPoint> other) {
    for (const auto& p : pts) {
      if (p.energy < lo || p.energy > hi) continue;
      const auto ref = interpolate(other, p.energy);
      if (!ref || *ref == 0.0) continue;
      worst = std::max(worst, std::abs(p.x_in - *ref) / std::abs(*ref));
    }
  };
  compare(ls, ps);
  compare(ps, ls);
  out.max_discrepancy = worst;
  return out;
}

namespace {

struct Amplitude {
  double value;
  double err;
};

Amplitude rabi_amplitude(const MeasurementTrace& tr) {
  tr.validate();
  const double a_pi = tr.meta_double("pi_amplitude", 1.0);
  if (!(a_pi > 0.0)) throw DomainError("e-f Rabi trace: pi_amplitude must be positive");
  std::vector<double> basis(tr.times.size());
  std::vector<double> sigma(tr.times.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const double s = std::sin(std::numbers::pi * tr.times[i] / (2.0 * a_pi));
    basis[i] = s * s;
    sigma[i] = tr.sigma[i] > 0.0 ? tr.sigma[i] : 1.0;
  }
  const auto lf = fit::fit_linear_weighted(basis, tr.values, sigma);
  return {lf.slope, lf.slope_err};
}

}  // namespace

ThermometryResult analyze_ef_rabi(const EfRabiPair& pair, const DeviceParams& dev) {
  const Amplitude a = rabi_amplitude(pair.without_pi);
  const Amplitude b = rabi_amplitude(pair.with_pi);
  const double sum = a.value + b.value;
  if (!(sum > 0.0)) throw NonThermalStateError("e-f Rabi: total oscillation amplitude is not positive");
  ThermometryResult out;
  out.id = pair.id;
  out.amp_without = a.value;
  out.amp_with = b.value;
  out.p_e = a.value / sum;
  out.p_e_err = std::hypot(b.value * a.err, a.value * b.err) / (sum * sum);
  out.temperature = thermometry(dev, out.p_e);
  out.x_thermal = thermal_xqp(dev, out.temperature);
  return out;
}

}  // namespace qpdyn::pipeline

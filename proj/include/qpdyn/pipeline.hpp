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

// End-to-end analysis of a measurement campaign: per-trace rate fits,
// truncation of the unmeasurable early delays, trapping-rate estimation,
// the recombination chi^2 scan, final recovery fits, CW analysis and the
// pulse-energy overlay.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qpdyn/bundle.hpp"
#include "qpdyn/fit.hpp"
#include "qpdyn/model.hpp"

namespace qpdyn::pipeline {

struct PipelineConfig {
  double low_power_threshold = 100e-9;   // W, datasets used for the s estimate
  double low_power_xin_limit = 1e-4;     // warn when a low-power x_in exceeds this
  /// Explicit recombination grid (1/s). Empty selects the default grid.
  std::vector<double> r_grid;
  double r_grid_min = 200e3;             // smallest nonzero r of the default grid
  double r_grid_max = 20e6;
  std::size_t r_grid_points = 50;
  double truncation_slack = 5.0;         // in combined standard deviations
  bool allow_single_point_suffix = false;
  double max_rel_rate_error = 0.25;      // T1 fits worse than this are unmeasurable
  double variance_floor = 1e-6;          // sigma_Gamma^2 >= floor * Gamma^2
  double linear_fit_max_power = 0.1e-6;  // W
  double saturation_sigma = 3.0;
  double max_exclusion_fraction = 0.2;
  double chi2_flat_factor = 1.05;
  bool float_exp_offset = true;
  BeamPosition reference_position = BeamPosition::C;
  double shift_prefactor = kShiftPrefactor;
  unsigned threads = 1;
  /// Recovery refits far from the best r are large-residual problems that
  /// converge linearly, so they get a larger iteration budget.
  fit::FitConfig fit = [] {
    fit::FitConfig f;
    f.max_iter = 1000;
    return f;
  }();

  std::vector<double> effective_r_grid() const;
};

struct RateEstimate {
  double delay = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
  bool measurable = false;
  std::string note;
};

struct RecoveryDataset {
  std::string id;
  SweepSource source = SweepSource::Power;
  OpticalDrive drive;
  std::vector<RateEstimate> fitted;
  std::size_t truncation_index = 0;
  bool rejected = false;
  std::string diagnostic;

  /// Points at or after the truncation index, variance-floored.
  std::vector<fit::RatePoint> usable(double variance_floor) const;
};

/// Fits every T1 trace of a run. Traces that cannot be fitted come back
/// unmeasurable with a note.
std::vector<RateEstimate> fit_rates(const RecoveryRun& run, const PipelineConfig& cfg);

/// Smallest index i such that every point from i on is measurable and each
/// successor exceeds its predecessor by at most slack * combined sigma.
/// Throws DatasetRejectedError when no admissible suffix exists.
std::size_t truncate_unphysical(std::span<const RateEstimate> series, double slack,
                                bool allow_single_point_suffix = false);
std::size_t truncate_unphysical(std::span<const double> gammas);

RecoveryDataset analyze_rates(const RecoveryRun& run, const PipelineConfig& cfg);

struct TrappingSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

/// Mean and sample standard deviation. Needs at least two values.
TrappingSummary summarize_trapping(std::span<const double> s_values);

struct TrappingEntry {
  std::string id;
  double power = 0.0;
  double s = 0.0;
  double s_err = 0.0;
  double x_in = 0.0;
  double x_in_err = 0.0;
  bool used = false;
  std::string note;
};

struct TrappingEstimate {
  TrappingSummary summary;
  std::vector<TrappingEntry> entries;
  std::vector<std::string> warnings;
};

/// Fits low-power datasets with r = 0 and s free, then averages s.
TrappingEstimate estimate_trapping(std::span<const RecoveryDataset> datasets, double coupling,
                                   const PipelineConfig& cfg);

struct Chi2Point {
  double r = 0.0;
  double chi2 = 0.0;  // mean reduced chi^2 over the datasets that converged
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

struct RSweep {
  double r_best = 0.0;
  std::vector<Chi2Point> profile;
  /// Largest r with chi2(r) <= flat_factor * chi2(0), refined between grid points.
  std::optional<double> flat_range;
  bool valid = true;
  std::vector<std::string> warnings;
};

RSweep chi2_sweep_r(std::span<const RecoveryDataset> datasets, double coupling, double s_fixed,
                    std::span<const double> r_grid, const PipelineConfig& cfg);

struct XinPoint {
  std::string id;
  SweepSource source = SweepSource::Power;
  double power = 0.0;
  double pulse_len = 0.0;
  double energy = 0.0;
  double x_in = 0.0;
  double x_in_err = 0.0;
  double gamma0 = 0.0;
  double gamma0_err = 0.0;
  double chi2_red = 0.0;
  std::size_t truncation_index = 0;
  bool converged = false;
  bool saturated = false;
};

struct XinAnalysis {
  std::vector<XinPoint> points;
  std::optional<fit::LinearFit> low_energy_fit;  // x_in versus power
  double fit_max_power = 0.0;
  double reference_pulse_len = 0.0;
  std::vector<std::string> warnings;
};

/// Final recovery fits with s and r fixed, the low-power linear fit of
/// x_in(P) and saturation flags for points falling below its extrapolation.
XinAnalysis extract_xin_vs_power(std::span<const RecoveryDataset> datasets, double coupling,
                                 double s, double r, const PipelineConfig& cfg);

struct DephasingRow {
  double power = 0.0;
  double t1 = 0.0;
  double t2_star = 0.0;
  std::optional<double> t_phi;
  double t2_over_2t1 = 0.0;
  bool feasible = true;
};

struct CwAnalysis {
  std::string id;
  BeamPosition position = BeamPosition::A;
  std::vector<CwRow> rows;
  double mu = 0.0;
  double mu_err = 0.0;
  double gamma0 = 0.0;
  double gamma0_err = 0.0;
  fit::LinearFit gamma_fit;
  std::vector<DephasingRow> dephasing;
  std::size_t infeasible_points = 0;
  std::optional<fit::LinearFit> shift_fit;
  double lambda = 0.0;  // fitted pull coefficient, omega_q = omega_q0 - lambda P
  double lambda_err = 0.0;
  double shift_theory_slope = 0.0;
  double shift_ratio = 0.0;
  double shift_ratio_err = 0.0;
  // Filled by collapse_check.
  double ratio_to_reference = 1.0;
  double ratio_to_reference_err = 0.0;
  double collapse_max_rel_dev = 0.0;
  /// Mean T2*/2T1 over the top decade of power.
  double top_decade_t2_ratio = 0.0;
  std::vector<std::string> warnings;
};

CwAnalysis analyze_cw(const CwSweep& sweep, const DeviceParams& dev, const PipelineConfig& cfg);

/// Conversion-constant ratios to the reference position and the pointwise
/// deviation of each measured Gamma(P) from the reference line evaluated at
/// the rescaled power.
void collapse_check(std::vector<CwAnalysis>& analyses, const std::vector<CwSweep>& sweeps,
                    BeamPosition reference);

struct EnergyPoint {
  double energy = 0.0;
  double x_in = 0.0;
  double x_in_err = 0.0;
  SweepSource source = SweepSource::Power;
  std::string id;
};

struct EnergyMerge {
  std::vector<EnergyPoint> points;  // sorted by energy
  std::optional<double> max_discrepancy;  // relative, over the overlap
  std::optional<std::pair<double, double>> overlap;
  std::vector<std::string> warnings;
};

EnergyMerge merge_by_energy(std::span<const EnergyPoint> power_sweep,
                            std::span<const EnergyPoint> length_sweep);

struct ThermometryResult {
  std::string id;
  double amp_without = 0.0;
  double amp_with = 0.0;
  double p_e = 0.0;
  double p_e_err = 0.0;
  double temperature = 0.0;
  double x_thermal = 0.0;
};

ThermometryResult analyze_ef_rabi(const EfRabiPair& pair, const DeviceParams& dev);

enum class StageStatus { Ok, Warning, Skipped, Failed };
std::string_view to_string(StageStatus s);

struct StageReport {
  std::string name;
  StageStatus status = StageStatus::Skipped;
  std::vector<std::string> messages;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string bundle_source;
  std::string timestamp;
};

struct PipelineReport {
  std::vector<StageReport> stages;
  std::vector<RecoveryDataset> datasets;
  std::optional<TrappingEstimate> trapping;
  std::optional<RSweep> r_sweep;
  double s_used = 0.0;
  double r_used = 0.0;
  std::optional<XinAnalysis> xin;
  std::vector<CwAnalysis> cw;
  std::optional<EnergyMerge> energy;
  std::vector<ThermometryResult> thermometry;
  Provenance provenance;
  PipelineConfig config;
  DeviceParams device;
  std::vector<std::string> bundle_warnings;

  /// False when any stage failed or nothing ran at all.
  bool ok() const;
  const StageReport* stage(std::string_view name) const;
};

/// Runs every stage; never throws on data problems, which are reported per
/// stage instead.
PipelineReport run_full(const Bundle& bundle, const PipelineConfig& cfg, Provenance prov = {});

}  // namespace qpdyn::pipeline

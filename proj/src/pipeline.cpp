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

#include "qpdyn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "qpdyn/errors.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn::pipeline {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::vector<double> PipelineConfig::effective_r_grid() const {
  if (!r_grid.empty()) {
    std::vector<double> g = r_grid;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }
  std::vector<double> g{0.0};
  if (r_grid_points > 0) {
    for (double r : geomspace(r_grid_min, r_grid_max, r_grid_points)) g.push_back(r);
  }
  return g;
}

std::vector<fit::RatePoint> RecoveryDataset::usable(double variance_floor) const {
  std::vector<fit::RatePoint> out;
  for (std::size_t i = truncation_index; i < fitted.size(); ++i) {
    const auto& f = fitted[i];
    const double floor = std::sqrt(variance_floor) * std::abs(f.gamma);
    out.push_back({f.delay, f.gamma, std::max(f.sigma, floor)});
  }
  return out;
}

std::vector<RateEstimate> fit_rates(const RecoveryRun& run, const PipelineConfig& cfg) {
  if (run.traces.size() != run.delays.size()) {
    throw DomainError("recovery run '" + run.id + "': delays and traces differ in count");
  }
  std::vector<RateEstimate> out(run.traces.size());
  fit::ExponentialOptions opt;
  opt.float_offset = cfg.float_exp_offset;
  opt.max_rel_err = cfg.max_rel_rate_error;
  opt.cfg = cfg.fit;
  for (std::size_t i = 0; i < run.traces.size(); ++i) {
    RateEstimate& est = out[i];
    est.delay = run.delays[i];
    try {
      const auto e = fit::fit_exponential(run.traces[i], opt);
      est.gamma = e.gamma;
      est.sigma = e.gamma_err;
      est.measurable = !e.flagged;
      if (e.flagged) {
        est.note = e.result.converged ? "rate not identifiable (relative error " +
                                            fmt(e.gamma_err / std::max(e.gamma, 1e-300)) + ")"
                                      : "fit did not converge";
      }
    } catch (const std::exception& ex) {
      est.measurable = false;
      est.note = ex.what();
    }
  }
  return out;
}

std::size_t truncate_unphysical(std::span<const RateEstimate> series, double slack,
                                bool allow_single_point_suffix) {
  const std::size_t n = series.size();
  if (n < 2) throw DatasetRejectedError("truncation: need at least 2 fitted points");
  if (!series.back().measurable) {
    throw DatasetRejectedError("truncation: last delay is not measurable");
  }
  std::size_t start = n - 1;
  while (start > 0) {
    const auto& prev = series[start - 1];
    const auto& cur = series[start];
    if (!prev.measurable) break;
    const double tol = slack * std::hypot(prev.sigma, cur.sigma);
    if (cur.gamma > prev.gamma + tol) break;
    --start;
  }
  if (start == n - 1 && !allow_single_point_suffix) {
    throw DatasetRejectedError("truncation: no monotonically decreasing suffix of length >= 2");
  }
  return start;
}

std::size_t truncate_unphysical(std::span<const double> gammas) {
  std::vector<RateEstimate> s;
  for (std::size_t i = 0; i < gammas.size(); ++i) s.push_back({double(i), gammas[i], 0.0, true, {}});
  return truncate_unphysical(s, 0.0, false);
}

RecoveryDataset analyze_rates(const RecoveryRun& run, const PipelineConfig& cfg) {
  RecoveryDataset ds;
  ds.id = run.id;
  ds.source = run.source;
  ds.drive = run.drive;
  ds.fitted = fit_rates(run, cfg);
  try {
    ds.truncation_index =
        truncate_unphysical(ds.fitted, cfg.truncation_slack, cfg.allow_single_point_suffix);
  } catch (const DatasetRejectedError& e) {
    ds.rejected = true;
    ds.diagnostic = e.what();
    ds.truncation_index = ds.fitted.size();
  }
  return ds;
}

TrappingSummary summarize_trapping(std::span<const double> s_values) {
  if (s_values.size() < 2) {
    throw InsufficientDataError("trapping estimate: need at least 2 qualifying datasets");
  }
  TrappingSummary out;
  out.n = s_values.size();
  out.mean = std::accumulate(s_values.begin(), s_values.end(), 0.0) / static_cast<double>(out.n);
  double ss = 0.0;
  for (double v : s_values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(out.n - 1));
  return out;
}

TrappingEstimate estimate_trapping(std::span<const RecoveryDataset> datasets, double coupling,
                                   const PipelineConfig& cfg) {
  TrappingEstimate est;
  std::vector<const RecoveryDataset*> chosen;
  for (const auto& ds : datasets) {
    if (ds.rejected || !(ds.drive.power < cfg.low_power_threshold)) continue;
    chosen.push_back(&ds);
  }
  est.entries.resize(chosen.size());
  parallel_for(chosen.size(), cfg.threads, [&](std::size_t i) {
    const auto& ds = *chosen[i];
    TrappingEntry& e = est.entries[i];
    e.id = ds.id;
    e.power = ds.drive.power;
    try {
      const auto pts = ds.usable(cfg.variance_floor);
      const auto f = fit::fit_recovery_free_s(pts, coupling, 0.0, cfg.fit);
      e.s = f.s;
      e.s_err = f.s_err;
      e.x_in = f.recovery.x_in;
      e.x_in_err = f.recovery.x_in_err;
      e.used = f.recovery.result.converged && f.s > 0.0;
      if (!e.used) e.note = "fit did not converge";
    } catch (const std::exception& ex) {
      e.note = ex.what();
    }
  });
  std::vector<double> values;
  for (const auto& e : est.entries) {
    if (!e.used) {
      est.warnings.push_back("dataset " + e.id + " excluded from s estimate: " + e.note);
      continue;
    }
    values.push_back(e.s);
    if (e.x_in > cfg.low_power_xin_limit) {
      est.warnings.push_back("dataset " + e.id + " has x_in = " + fmt(e.x_in) +
                             " above the low-power limit " + fmt(cfg.low_power_xin_limit));
    }
  }
  est.summary = summarize_trapping(values);
  return est;
}

RSweep chi2_sweep_r(std::span<const RecoveryDataset> datasets, double coupling, double s_fixed,
                    std::span<const double> r_grid_in, const PipelineConfig& cfg) {
  std::vector<double> r_grid(r_grid_in.begin(), r_grid_in.end());
  std::sort(r_grid.begin(), r_grid.end());
  if (r_grid.empty()) throw DomainError("chi2 sweep: empty r grid");
  for (double r : r_grid) {
    if (!(r >= 0.0)) throw DomainError("chi2 sweep: r must be >= 0");
  }
  std::vector<const RecoveryDataset*> used;
  for (const auto& ds : datasets) {
    if (!ds.rejected && ds.fitted.size() - ds.truncation_index >= 3) used.push_back(&ds);
  }
  if (used.empty()) throw InsufficientDataError("chi2 sweep: no datasets with >= 3 usable points");

  RSweep out;
  const std::size_t n_ds = used.size();
  std::vector<std::vector<fit::RatePoint>> series(n_ds);
  for (std::size_t id = 0; id < n_ds; ++id) series[id] = used[id]->usable(cfg.variance_floor);

  // Reduced chi^2 of every dataset refit at r; NaN marks a failed refit.
  auto refit_all = [&](double r) {
    std::vector<double> chi2(n_ds, std::numeric_limits<double>::quiet_NaN());
    parallel_for(n_ds, cfg.threads, [&](std::size_t id) {
      try {
        const auto f = fit::fit_recovery(series[id], coupling, s_fixed, r, cfg.fit);
        if (f.result.converged) chi2[id] = f.result.reduced_chi2();
      } catch (const std::exception&) {
      }
    });
    return chi2;
  };
  auto summarize = [&](double r, const std::vector<double>& chi2) {
    Chi2Point pt;
    pt.r = r;
    double sum = 0.0;
    for (double c : chi2) {
      if (std::isnan(c)) {
        ++pt.n_excluded;
      } else {
        sum += c;
        ++pt.n_used;
      }
    }
    pt.chi2 = pt.n_used > 0 ? sum / static_cast<double>(pt.n_used)
                            : std::numeric_limits<double>::quiet_NaN();
    return pt;
  };

  std::size_t excluded_total = 0;
  for (double r : r_grid) {
    const auto chi2 = refit_all(r);
    for (std::size_t id = 0; id < n_ds; ++id) {
      if (std::isnan(chi2[id])) {
        out.warnings.push_back("refit of " + used[id]->id + " at r = " + fmt(r) +
                               " did not converge; excluded");
      }
    }
    out.profile.push_back(summarize(r, chi2));
    excluded_total += out.profile.back().n_excluded;
  }
  const double frac =
      static_cast<double>(excluded_total) / static_cast<double>(r_grid.size() * n_ds);
  if (frac > cfg.max_exclusion_fraction) {
    out.valid = false;
    out.warnings.push_back("chi2 sweep invalid: " + fmt(100.0 * frac) + "% of refits excluded");
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : out.profile) {
    if (pt.n_used > 0 && pt.chi2 < best) {
      best = pt.chi2;
      out.r_best = pt.r;
    }
  }
  if (!std::isfinite(best)) out.valid = false;

  if (out.profile.front().r == 0.0 && out.profile.front().n_used > 0) {
    const double limit = cfg.chi2_flat_factor * out.profile.front().chi2;
    std::size_t last = 0;
    for (std::size_t i = 0; i < out.profile.size(); ++i) {
      if (out.profile[i].n_used > 0 && out.profile[i].chi2 <= limit) last = i;
    }
    double lo = out.profile[last].r;
    if (last + 1 < out.profile.size()) {
      // Locate the band edge between grid points.
      double hi = out.profile[last + 1].r;
      for (int it = 0; it < 40 && hi - lo > 1e-9 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto pt = summarize(mid, refit_all(mid));
        (pt.n_used > 0 && pt.chi2 <= limit ? lo : hi) = mid;
      }
    }
    out.flat_range = lo;
  }
  return out;
}

XinAnalysis extract_xin_vs_power(std::span<const RecoveryDataset> datasets, double coupling,
                                 double s, double r, const PipelineConfig& cfg) {
  XinAnalysis out;
  out.fit_max_power = cfg.linear_fit_max_power;
  std::vector<const RecoveryDataset*> chosen;
  for (const auto& ds : datasets) {
    if (ds.rejected) {
      out.warnings.push_back("dataset " + ds.id + " rejected: " + ds.diagnostic);
      continue;
    }
    chosen.push_back(&ds);
  }
  std::vector<std::optional<XinPoint>> results(chosen.size());
  std::vector<std::string> errors(chosen.size());
  parallel_for(chosen.size(), cfg.threads, [&](std::size_t i) {
    const auto& ds = *chosen[i];
    try {
      const auto f = fit::fit_recovery(ds.usable(cfg.variance_floor), coupling, s, r, cfg.fit);
      XinPoint p;
      p.id = ds.id;
      p.source = ds.source;
      p.power = ds.drive.power;
      p.pulse_len = ds.drive.pulse_len;
      p.energy = ds.drive.pulse_energy();
      p.x_in = f.x_in;
      p.x_in_err = f.x_in_err;
      p.gamma0 = f.gamma0;
      p.gamma0_err = f.gamma0_err;
      p.chi2_red = f.result.reduced_chi2();
      p.truncation_index = ds.truncation_index;
      p.converged = f.result.converged;
      results[i] = p;
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (results[i]) {
      if (!results[i]->converged) out.warnings.push_back("recovery fit of " + chosen[i]->id + " did not converge");
      out.points.push_back(*results[i]);
    } else {
      out.warnings.push_back("recovery fit of " + chosen[i]->id + " failed: " + errors[i]);
    }
  }

  // Reference pulse length: the one shared by the low-power power-sweep points.
  std::vector<double> x, y, sig;
  for (const auto& p : out.points) {
    if (p.source != SweepSource::Power || p.power > cfg.linear_fit_max_power) continue;
    x.push_back(p.power);
    y.push_back(p.x_in);
    sig.push_back(std::max({p.x_in_err, 1e-6 * std::abs(p.x_in), 1e-300}));
    out.reference_pulse_len = p.pulse_len;
  }
  if (x.size() >= 2) {
    try {
      out.low_energy_fit = fit::fit_linear_weighted(x, y, sig);
    } catch (const std::exception& ex) {
      out.warnings.push_back(std::string("low-energy linear fit failed: ") + ex.what());
    }
  } else {
    out.warnings.push_back("fewer than two power-sweep points below " +
                           fmt(cfg.linear_fit_max_power) + " W; no linear fit");
  }

  if (out.low_energy_fit && out.reference_pulse_len > 0.0) {
    const auto& lf = *out.low_energy_fit;
    const auto& cov = lf.result.covariance;
    for (auto& p : out.points) {
      const double p_eq = p.energy / out.reference_pulse_len;
      if (p_eq <= cfg.linear_fit_max_power) continue;
      const double pred = lf.slope * p_eq + lf.intercept;
      const double var_pred = p_eq * p_eq * cov(0, 0) + cov(1, 1) + 2.0 * p_eq * cov(0, 1);
      const double sigma = std::sqrt(p.x_in_err * p.x_in_err + std::max(var_pred, 0.0));
      p.saturated = p.x_in < pred - cfg.saturation_sigma * sigma;
    }
  }
  return out;
}

const StageReport* PipelineReport::stage(std::string_view name) const {
  for (const auto& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

bool PipelineReport::ok() const {
  bool any_ran = false;
  for (const auto& s : stages) {
    if (s.status == StageStatus::Failed) return false;
    if (s.status == StageStatus::Ok || s.status == StageStatus::Warning) any_ran = true;
  }
  return any_ran;
}

std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::Ok: return "ok";
    case StageStatus::Warning: return "warning";
    case StageStatus::Skipped: return "skipped";
    case StageStatus::Failed: return "failed";
  }
  return "?";
}

namespace {

void finish(StageReport& st, const std::vector<std::string>& warnings) {
  st.messages.insert(st.messages.end(), warnings.begin(), warnings.end());
  if (st.status == StageStatus::Ok && !st.messages.empty()) st.status = StageStatus::Warning;
}

StageReport skipped(std::string name, std::string why) {
  return StageReport{std::move(name), StageStatus::Skipped, {std::move(why)}};
}

}  // namespace

PipelineReport run_full(const Bundle& bundle_in, const PipelineConfig& cfg, Provenance prov) {
  PipelineReport rep;
  rep.config = cfg;
  rep.device = bundle_in.device;
  rep.provenance = std::move(prov);
  if (rep.provenance.seed == 0) rep.provenance.seed = bundle_in.seed;

  // Order-normalize so permuted bundles give identical reports.
  std::vector<const RecoveryRun*> runs;
  for (const auto& r : bundle_in.recovery) runs.push_back(&r);
  std::sort(runs.begin(), runs.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::vector<const CwSweep*> sweeps;
  for (const auto& s : bundle_in.cw) sweeps.push_back(&s);
  std::sort(sweeps.begin(), sweeps.end(), [](auto* a, auto* b) {
    return std::pair(a->drive.position, a->id) < std::pair(b->drive.position, b->id);
  });

  double coupling = 0.0;
  try {
    bundle_in.device.validate();
    coupling = qp_coupling(bundle_in.device);
  } catch (const std::exception& ex) {
    rep.stages.push_back({"device", StageStatus::Failed, {ex.what()}});
    return rep;
  }

  // --- per-trace rates and truncation -------------------------------------
  if (runs.empty()) {
    for (const char* name : {"rates", "trapping", "recombination", "recovery", "energy"}) {
      rep.stages.push_back(skipped(name, "no recovery datasets in bundle"));
    }
  } else {
    StageReport st{"rates", StageStatus::Ok, {}};
    rep.datasets.resize(runs.size());
    parallel_for(runs.size(), cfg.threads, [&](std::size_t i) {
      try {
        rep.datasets[i] = analyze_rates(*runs[i], cfg);
      } catch (const std::exception& ex) {
        rep.datasets[i].id = runs[i]->id;
        rep.datasets[i].source = runs[i]->source;
        rep.datasets[i].drive = runs[i]->drive;
        rep.datasets[i].rejected = true;
        rep.datasets[i].diagnostic = ex.what();
      }
    });
    std::size_t rejected = 0;
    for (const auto& ds : rep.datasets) {
      for (const auto& f : ds.fitted) {
        if (!f.measurable && f.note.rfind("rate not identifiable", 0) != 0 &&
            f.note != "fit did not converge") {
          st.messages.push_back("dataset " + ds.id + " delay " + fmt(f.delay) + ": " + f.note);
        }
      }
      if (ds.rejected) {
        ++rejected;
        st.messages.push_back("dataset " + ds.id + " rejected: " + ds.diagnostic);
      }
    }
    if (rejected == rep.datasets.size()) st.status = StageStatus::Failed;
    finish(st, {});
    rep.stages.push_back(st);

    // --- trapping rate -------------------------------------------------------
    StageReport trap{"trapping", StageStatus::Ok, {}};
    bool have_s = false;
    try {
      rep.trapping = estimate_trapping(rep.datasets, coupling, cfg);
      rep.s_used = rep.trapping->summary.mean;
      have_s = true;
      finish(trap, rep.trapping->warnings);
    } catch (const std::exception& ex) {
      trap.status = StageStatus::Failed;
      trap.messages.push_back(ex.what());
    }
    rep.stages.push_back(trap);

    if (!have_s) {
      for (const char* name : {"recombination", "recovery", "energy"}) {
        rep.stages.push_back(skipped(name, "trapping rate unavailable"));
      }
    } else {
      // --- recombination scan ------------------------------------------------
      StageReport rec{"recombination", StageStatus::Ok, {}};
      try {
        rep.r_sweep = chi2_sweep_r(rep.datasets, coupling, rep.s_used, cfg.effective_r_grid(), cfg);
        if (rep.r_sweep->valid) {
          rep.r_used = rep.r_sweep->r_best;
        } else {
          rec.status = StageStatus::Failed;
          rec.messages.push_back("sweep invalid; final fits use r = 0");
        }
        finish(rec, rep.r_sweep->warnings);
      } catch (const std::exception& ex) {
        rec.status = StageStatus::Failed;
        rec.messages.push_back(ex.what());
      }
      rep.stages.push_back(rec);

      // --- final recovery fits ------------------------------------------------
      StageReport fin{"recovery", StageStatus::Ok, {}};
      rep.xin = extract_xin_vs_power(rep.datasets, coupling, rep.s_used, rep.r_used, cfg);
      if (rep.xin->points.empty()) fin.status = StageStatus::Failed;
      finish(fin, rep.xin->warnings);
      rep.stages.push_back(fin);

      // --- energy overlay ------------------------------------------------------
      std::vector<EnergyPoint> by_power, by_length;
      for (const auto& p : rep.xin->points) {
        EnergyPoint e{p.energy, p.x_in, p.x_in_err, p.source, p.id};
        (p.source == SweepSource::Power ? by_power : by_length).push_back(e);
      }
      if (by_power.empty() && by_length.empty()) {
        rep.stages.push_back(skipped("energy", "no fitted recovery datasets"));
      } else {
        StageReport en{"energy", StageStatus::Ok, {}};
        rep.energy = merge_by_energy(by_power, by_length);
        finish(en, rep.energy->warnings);
        rep.stages.push_back(en);
      }
    }
  }

  // --- CW analysis -------------------------------------------------------------
  if (sweeps.empty()) {
    rep.stages.push_back(skipped("cw", "no CW sweeps in bundle"));
  } else {
    StageReport cw{"cw", StageStatus::Ok, {}};
    std::vector<CwSweep> kept;
    for (const auto* sw : sweeps) {
      try {
        rep.cw.push_back(analyze_cw(*sw, bundle_in.device, cfg));
        kept.push_back(*sw);
        finish(cw, rep.cw.back().warnings);
      } catch (const std::exception& ex) {
        cw.messages.push_back("sweep " + sw->id + " failed: " + ex.what());
      }
    }
    if (rep.cw.empty()) {
      cw.status = StageStatus::Failed;
    } else {
      try {
        collapse_check(rep.cw, kept, cfg.reference_position);
      } catch (const std::exception& ex) {
        cw.messages.push_back(std::string("collapse check skipped: ") + ex.what());
      }
    }
    finish(cw, {});
    rep.stages.push_back(cw);
  }

  // --- thermometry -------------------------------------------------------------
  if (bundle_in.ef_rabi.empty()) {
    rep.stages.push_back(skipped("thermometry", "no e-f Rabi data in bundle"));
  } else {
    StageReport th{"thermometry", StageStatus::Ok, {}};
    for (const auto& pair : bundle_in.ef_rabi) {
      try {
        rep.thermometry.push_back(analyze_ef_rabi(pair, bundle_in.device));
      } catch (const std::exception& ex) {
        th.messages.push_back("pair " + pair.id + ": " + ex.what());
      }
    }
    if (rep.thermometry.empty()) th.status = StageStatus::Failed;
    finish(th, {});
    rep.stages.push_back(th);
  }

  rep.bundle_warnings = bundle_in.warnings;
  if (!rep.bundle_warnings.empty()) {
    rep.stages.insert(rep.stages.begin(),
                      StageReport{"load", StageStatus::Warning, rep.bundle_warnings});
  }
  return rep;
}

}  // namespace qpdyn::pipeline

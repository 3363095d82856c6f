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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runtime limits are part of each criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "qpdyn/fit.hpp"
#include "qpdyn/imaging.hpp"
#include "qpdyn/model.hpp"
#include "qpdyn/pipeline.hpp"
#include "qpdyn/synth.hpp"
#include "qpdyn/util.hpp"

using namespace qpdyn;

namespace {

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) {
    if (pass) detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// ---- 1 --------------------------------------------------------------------

Outcome coupling_constant() {
  Outcome o;
  const double c = qp_coupling(DeviceParams{});
  const double target = 2.0 * M_PI * 7.74e9;
  o.require(rel(c, target) <= 5e-3, fmt("C = %.6g, off by %.3g", c, rel(c, target)));
  o.require(rel(c, oracle::coupling(6.30e9, 46.9e9)) <= 1e-9, "closed form disagrees with the direct formula");
  o.note(fmt("C/2pi = %.4g GHz", c / (2 * M_PI) / 1e9));
  return o;
}

// ---- 2 --------------------------------------------------------------------

Outcome ode_oracle() {
  Outcome o;
  const double rs[] = {0.0, 1e5, 1e6, 1e7};
  const double ss[] = {1e3, 1e4, 3e4, 1e5};
  const double xs[] = {1e-8, 1e-6, 1e-4, 1e-2};
  const auto times = linspace(0.0, 1e-3, 21);
  double worst = 0.0;
  for (double r : rs)
    for (double s : ss)
      for (double x0 : xs)
        for (double x_in : xs) {
          const auto d = QpDynamics::with_steady_state(s, r, x0, x_in);
          const auto ref = oracle::integrate_density(d, times);
          const auto got = xqp_trajectory(d, times);
          for (std::size_t i = 0; i < times.size(); ++i) worst = std::max(worst, rel(got[i], ref[i]));
        }
  o.require(worst < 1e-6, fmt("max relative error %.3g", worst));
  o.note(fmt("max relative error %.3g over 256 cases", worst));
  return o;
}

// ---- 3 --------------------------------------------------------------------

Outcome trapping_only_identity() {
  Outcome o;
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> lx(-8.0, -2.0), ls(3.0, 5.0), lt(-7.0, -2.5);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double s = std::pow(10.0, ls(rng)), x0 = std::pow(10.0, lx(rng));
    const double x_in = std::pow(10.0, lx(rng)), t = std::pow(10.0, lt(rng));
    const double expect = x0 + x_in * std::exp(-s * t);
    worst = std::max(worst, rel(xqp_at(QpDynamics::with_steady_state(s, 0.0, x0, x_in), t), expect));
  }
  o.require(worst <= 1e-12, fmt("max relative error %.3g", worst));
  o.note(fmt("max relative error %.3g", worst));
  return o;
}

// ---- 4, 5 -----------------------------------------------------------------

pipeline::PipelineConfig pipeline_config() {
  pipeline::PipelineConfig cfg;
  cfg.threads = workers();
  return cfg;
}

Outcome golden_round_trip() {
  Outcome o;
  const auto spec = synth::golden_spec();
  const Bundle b = synth::make_bundle(spec, workers());
  const auto rep = pipeline::run_full(b, pipeline_config());
  o.require(rep.ok(), "pipeline reported a failed stage");
  if (!rep.trapping || !rep.r_sweep || !rep.xin || !rep.xin->low_energy_fit) {
    o.require(false, "missing trapping, recombination or x_in results");
    return o;
  }
  const double s = rep.trapping->summary.mean;
  o.require(std::abs(s - 9e3) <= 1e3, fmt("s = %.1f 1/s", s));
  o.require(rep.r_sweep->r_best == 0.0, fmt("r_best = %.4g", rep.r_sweep->r_best));

  double worst = 0.0, lo = 1.0, hi = 0.0;
  std::size_t n = 0;
  for (const auto& run : b.recovery) {
    const double truth = std::stod(run.meta.at("x_in_true"));
    lo = std::min(lo, truth);
    hi = std::max(hi, truth);
    const auto it = std::find_if(rep.xin->points.begin(), rep.xin->points.end(),
                                 [&](const auto& p) { return p.id == run.id; });
    if (it == rep.xin->points.end()) {
      o.require(false, run.id + " has no x_in estimate");
      continue;
    }
    worst = std::max(worst, rel(it->x_in, truth));
    ++n;
  }
  o.require(worst <= 0.05, fmt("worst x_in error %.3g", worst));
  o.require(lo <= 1e-6 * (1 + 1e-9) && hi >= 1e-2 * (1 - 1e-9), "generator x_in does not span 1e-6..1e-2");

  const double slope_true = spec.energy_map.mu_pulse * spec.pulse_len;
  const double slope = rep.xin->low_energy_fit->slope;
  o.require(rel(slope, slope_true) <= 0.05, fmt("low-energy slope %.5g vs %.5g", slope, slope_true));
  o.note(fmt("s = %.1f +- %.1f 1/s, r_best = 0", s, rep.trapping->summary.std));
  o.note(fmt("%.0f datasets, worst x_in error %.2g%%, slope error %.2g%%", double(n), 100 * worst,
             100 * rel(slope, slope_true)));
  return o;
}

Outcome chi2_flatness() {
  Outcome o;
  const auto cfg = pipeline_config();
  const auto spec = synth::golden_spec();
  const Bundle noisy = synth::make_bundle(spec, workers());
  const auto rep = pipeline::run_full(noisy, cfg);
  if (!rep.r_sweep || rep.r_sweep->profile.empty()) {
    o.require(false, "no chi2 profile");
    return o;
  }
  const auto& sw = *rep.r_sweep;
  o.require(sw.flat_range.has_value() && *sw.flat_range > 0.0, "flat range is empty");
  if (sw.flat_range) {
    const double c = qp_coupling(noisy.device);
    const std::vector<double> probe{0.0, *sw.flat_range};
    const auto check = pipeline::chi2_sweep_r(rep.datasets, c, rep.s_used, probe, cfg);
    const double ratio = check.profile[1].chi2 / check.profile[0].chi2;
    o.require(ratio <= cfg.chi2_flat_factor * (1 + 1e-9), fmt("chi2(flat)/chi2(0) = %.6g", ratio));
    for (const auto& p : sw.profile) {
      if (p.r <= *sw.flat_range) {
        o.require(p.chi2 <= cfg.chi2_flat_factor * sw.profile.front().chi2 * (1 + 1e-9),
                  fmt("chi2 above band at r = %.4g inside the flat range", p.r));
      }
    }
    o.note(fmt("flat for r <= %.4g 1/s (chi2 ratio %.4f)", *sw.flat_range, ratio));
  }

  auto quiet = spec;
  quiet.noise.enabled = false;
  quiet.cw_powers.clear();
  quiet.temperature = 0.0;
  const auto rep0 = pipeline::run_full(synth::make_bundle(quiet, workers()), cfg);
  if (!rep0.r_sweep) {
    o.require(false, "no chi2 profile on noiseless data");
    return o;
  }
  std::size_t drops = 0;
  for (std::size_t i = 1; i < rep0.r_sweep->profile.size(); ++i) {
    drops += rep0.r_sweep->profile[i].chi2 < rep0.r_sweep->profile[i - 1].chi2;
  }
  o.require(drops == 0, fmt("noiseless profile decreases at %.0f grid steps", double(drops)));
  o.note("noiseless profile non-decreasing");
  return o;
}

// ---- 6, 7, 8 --------------------------------------------------------------

synth::BundleSpec cw_only(const synth::BundleSpec& base) {
  auto spec = base;
  spec.recovery_powers.clear();
  spec.pulse_lengths.clear();
  spec.temperature = 0.0;
  return spec;
}

std::vector<pipeline::CwAnalysis> analyze_all(const Bundle& b, const pipeline::PipelineConfig& cfg) {
  std::vector<pipeline::CwAnalysis> an;
  for (const auto& sw : b.cw) an.push_back(pipeline::analyze_cw(sw, b.device, cfg));
  pipeline::collapse_check(an, b.cw, cfg.reference_position);
  return an;
}

const pipeline::CwAnalysis* find(const std::vector<pipeline::CwAnalysis>& an, BeamPosition p) {
  for (const auto& a : an)
    if (a.position == p) return &a;
  return nullptr;
}

Outcome cw_collapse() {
  Outcome o;
  auto spec = cw_only(synth::golden_spec());
  spec.mu_cw = {{BeamPosition::A, 1.75e-6 * 1e9}, {BeamPosition::B, 1.61e-5 * 1e9},
                {BeamPosition::C, 2.96e-8 * 1e9}};
  spec.noise.enabled = false;
  const auto an = analyze_all(synth::make_bundle(spec), pipeline_config());
  const auto* a = find(an, BeamPosition::A);
  const auto* b = find(an, BeamPosition::B);
  if (!a || !b || !find(an, BeamPosition::C)) {
    o.require(false, "missing positions");
    return o;
  }
  o.require(rel(a->ratio_to_reference, 59.0) <= 0.01, fmt("mu_A/mu_C = %.5g", a->ratio_to_reference));
  o.require(rel(b->ratio_to_reference, 544.0) <= 0.01, fmt("mu_B/mu_C = %.5g", b->ratio_to_reference));
  double dev = 0.0;
  for (const auto& x : an) dev = std::max(dev, x.collapse_max_rel_dev);
  o.require(dev <= 1e-10, fmt("collapse deviation %.3g", dev));
  o.note(fmt("ratios %.4g and %.4g, collapse deviation %.2g", a->ratio_to_reference, b->ratio_to_reference, dev));
  return o;
}

Outcome dephasing_limit() {
  Outcome o;
  auto spec = cw_only(synth::golden_spec());
  // Reference position up to x = 3e-4, where T1 falls well below T_phi. The
  // wider detuning and denser Ramsey sampling keep the fringe resolvable at
  // both ends of the sweep.
  std::vector<double> powers{0.0};
  for (double p : geomspace(3e-8 / 29.6, 3e-4 / 29.6, 13)) powers.push_back(p);
  spec.cw_powers = {{BeamPosition::C, powers}};
  spec.cw.t_phi = 20e-6;
  spec.cw.detune = 8e6;
  spec.cw.ramsey_points = 1000;
  const auto an = analyze_all(synth::make_bundle(spec, workers()), pipeline_config());
  if (an.size() != 1) {
    o.require(false, "expected one sweep");
    return o;
  }
  const double r = an[0].top_decade_t2_ratio;
  o.require(std::abs(r - 1.0) <= 0.05, fmt("top-decade T2*/2T1 = %.4f", r));
  o.note(fmt("top-decade T2*/2T1 = %.4f (T_phi = 20 us)", r));
  return o;
}

Outcome shift_slope() {
  Outcome o;
  auto spec = cw_only(synth::golden_spec());
  spec.cw.slope_scale = 0.83;
  const auto an = analyze_all(synth::make_bundle(spec, workers()), pipeline_config());
  o.require(an.size() == 3, "expected three sweeps");
  for (const auto& a : an) {
    o.require(a.shift_fit.has_value() && std::abs(a.shift_ratio - 0.83) <= 0.02,
              "position " + std::string(to_string(a.position)) + fmt(": ratio %.4f", a.shift_ratio));
    o.note(std::string(to_string(a.position)) + fmt(": %.4f +- %.4f", a.shift_ratio, a.shift_ratio_err));
  }
  return o;
}

// ---- 9, 10 ----------------------------------------------------------------

Outcome thermal_density() {
  Outcome o;
  const double x = thermal_xqp(DeviceParams{}, 0.165);
  o.require(rel(x, 7.8e-7) <= 0.10, fmt("x_th = %.4g", x));
  o.note(fmt("x_th(165 mK) = %.3g", x));
  return o;
}

Outcome timescales() {
  Outcome o;
  const double s = 9e3;
  const double tau = 1.0 / s;
  o.require(std::abs(tau * 1e3 - 0.111) < 5e-4, fmt("1/s = %.5g ms", tau * 1e3));
  const auto scene = imaging::SceneGeometry::default_scene();
  const double td = diffusion_time(imaging::pad_diffusion_length(scene), kDefaultDiffusionConst);
  o.require(rel(td, 0.05e-3) <= 0.01, fmt("diffusion time %.4g ms", td * 1e3));
  o.require(td < 0.5 * tau, "diffusion time not below half the trapping time");
  o.require(trapping_negligible(td, s), "trapping_negligible predicate false");
  o.note(fmt("1/s = %.4g ms, diffusion %.3g ms", tau * 1e3, td * 1e3));
  return o;
}

// ---- 11 -------------------------------------------------------------------

Outcome fit_engine() {
  Outcome o;
  using namespace qpdyn::fit;
  auto trace_of = [](const ModelFunction& m, const std::vector<double>& p, std::vector<double> t,
                     std::uint64_t seed) {
    MeasurementTrace tr;
    tr.times = std::move(t);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.01);
    for (double x : tr.times) {
      tr.values.push_back(m.value(x, p) + (seed ? n(rng) : 0.0));
      tr.sigma.push_back(0.01);
    }
    return tr;
  };

  double worst = 0.0;
  {
    const auto f = fit_exponential(trace_of(exponential_model(), {0.95, 2.3e5, 0.02}, linspace(0, 30e-6, 60), 0));
    worst = std::max({worst, rel(f.gamma, 2.3e5), rel(f.result.params[0], 0.95), rel(f.result.params[2], 0.02)});
  }
  {
    const auto f = fit_ramsey(trace_of(ramsey_model(), {0.5, 8e-6, 3e6, 0.2, 0.5}, linspace(0, 24e-6, 400), 0));
    worst = std::max({worst, rel(f.t2_star, 8e-6), rel(f.detune, 3e6)});
  }
  {
    const double c = qp_coupling(DeviceParams{});
    for (double r : {0.0, 2e6}) {
      const auto m = recovery_model(c, 9e3, r);
      std::vector<RatePoint> pts;
      for (double t : linspace(10e-6, 1e-3, 60)) {
        const double g = m.value(t, std::vector<double>{1e-3, 1e5});
        pts.push_back({t, g, 1e-3 * g});
      }
      const auto f = fit_recovery(pts, c, 9e3, r);
      worst = std::max({worst, rel(f.x_in, 1e-3), rel(f.gamma0, 1e5)});
    }
  }
  {
    const auto tr = trace_of(linear_model(), {3.0, -0.5}, linspace(0, 1, 20), 0);
    const auto f = fit_linear_weighted(tr.times, tr.values, tr.sigma);
    const std::vector<double> init{1.0, 0.0};
    const auto g = nlls_fit(linear_model(), as_fit_data(tr), init);
    worst = std::max({worst, rel(f.slope, 3.0), rel(f.intercept, -0.5), rel(g.params[0], 3.0), rel(g.params[1], -0.5)});
  }
  o.require(worst <= 1e-6, fmt("noiseless round-trip error %.3g", worst));

  double jac = 0.0;
  auto jac_check = [&](const ModelFunction& m, const std::vector<double>& p, const std::vector<double>& xs) {
    std::vector<double> g(m.n_params), fd(m.n_params);
    for (double x : xs) {
      m.gradient(x, p, g);
      numeric_gradient(m, x, p, fd);
      for (std::size_t k = 0; k < m.n_params; ++k) {
        const double scale = std::max(std::abs(fd[k]), 1e-8 * std::abs(m.value(x, p)) / std::max(std::abs(p[k]), 1e-300));
        jac = std::max(jac, std::abs(g[k] - fd[k]) / scale);
      }
    }
  };
  const double c = qp_coupling(DeviceParams{});
  jac_check(exponential_model(), {0.9, 2e5, 0.05}, {0.0, 1e-6, 5e-6, 2e-5});
  jac_check(ramsey_model(), {0.5, 8e-6, 3e6, 0.3, 0.5}, {0.0, 1e-7, 2e-6, 9e-6});
  jac_check(linear_model(), {2.0, 1.0}, {-1.0, 0.5, 3.0});
  jac_check(recovery_model(c, 9e3, 1e6), {1e-4, 1e5}, {1e-5, 1e-4, 5e-4});
  jac_check(recovery_model_free_s(c, 1e6), {1e-4, 1e5, 9e3}, {1e-5, 1e-4, 5e-4});
  o.require(jac <= 1e-6, fmt("Jacobian disagreement %.3g", jac));

  std::size_t rises = 0, fits = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto tr = trace_of(exponential_model(), {0.9, 2e5, 0.05}, linspace(0, 30e-6, 50), seed);
    const std::vector<double> init{0.5, 1e4, 0.0};
    const auto r = nlls_fit(exponential_model(), as_fit_data(tr), init);
    for (std::size_t i = 1; i < r.chi2_history.size(); ++i) rises += r.chi2_history[i] > r.chi2_history[i - 1];
    ++fits;
  }
  o.require(rises == 0, fmt("%.0f accepted steps increased chi2", double(rises)));
  o.note(fmt("round trip %.2g, Jacobian %.2g, %.0f monotone fits", worst, jac, double(fits)));
  return o;
}

// ---- 12 -------------------------------------------------------------------

Outcome imaging_round_trip() {
  Outcome o;
  const auto scene = imaging::SceneGeometry::default_scene();
  const imaging::GridSpec grid;
  const auto img = imaging::raster_image(scene, imaging::BeamSpec{}, grid, workers());
  try {
    const auto f = imaging::locate_features(img);
    const double ex = std::abs(f.a.x - scene.pad->cx), ey = std::abs(f.a.y - scene.pad->cy);
    o.require(ex <= grid.dx() && ey <= grid.dy(), fmt("pad centre off by (%.3g, %.3g) m", ex, ey));
    o.require(f.c.x == f.b.x && std::abs(f.b.y - f.c.y - 200e-6) <= 1e-12, "C is not 200 um below B");
    o.note(fmt("pad centre error (%.2g, %.2g) um", ex * 1e6, ey * 1e6));
  } catch (const std::exception& e) {
    o.require(false, e.what());
  }
  imaging::SceneGeometry edge;
  edge.walls = {imaging::WallBand{-std::numeric_limits<double>::infinity(), 0.0}};
  const double t = imaging::transmission_at(edge, imaging::BeamSpec{}, 0.0, 0.0);
  o.require(std::abs(t - 0.5) <= 1e-6, fmt("edge transmission %.9f", t));
  o.note(fmt("edge transmission %.9f", t));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double max_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "coupling constant", 1.0, coupling_constant},
      {2, "closed form vs ODE integration", 10.0, ode_oracle},
      {3, "trapping-only identity", 1.0, trapping_only_identity},
      {4, "golden pipeline round trip", 120.0, golden_round_trip},
      {5, "chi2 flatness", 120.0, chi2_flatness},
      {6, "CW collapse", 10.0, cw_collapse},
      {7, "dephasing limit", 10.0, dephasing_limit},
      {8, "frequency-shift slope", 10.0, shift_slope},
      {9, "thermal density", 1.0, thermal_density},
      {10, "timescale identities", 1.0, timescales},
      {11, "fit-engine properties", 30.0, fit_engine},
      {12, "imaging round trip", 10.0, imaging_round_trip},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= c.max_seconds, fmt("took %.1f s, limit %.0f s", secs, c.max_seconds));
    failures += !o.pass;
    std::printf("%s [%2d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

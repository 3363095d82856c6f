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
#include <complex>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>

#include "qpdyn/errors.hpp"
#include "qpdyn/fit.hpp"
#include "qpdyn/model.hpp"

namespace qpdyn::fit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

FitResult best_of(const ModelFunction& model, const FitData& data,
                  const std::vector<std::vector<double>>& starts, const FitConfig& cfg) {
  std::optional<FitResult> best;
  std::string last_error;
  for (const auto& start : starts) {
    try {
      FitResult r = nlls_fit(model, data, start, cfg);
      if (!best || (r.converged && !best->converged) ||
          (r.converged == best->converged && r.chi2 < best->chi2)) {
        best = std::move(r);
      }
    } catch (const RankDeficiencyError& e) {
      last_error = e.what();
    }
  }
  if (!best) throw RankDeficiencyError(last_error);
  return *best;
}

}  // namespace

ModelFunction exponential_model() {
  ModelFunction m;
  m.n_params = 3;
  m.value = [](double t, std::span<const double> p) { return p[0] * std::exp(-p[1] * t) + p[2]; };
  m.gradient = [](double t, std::span<const double> p, std::span<double> g) {
    const double e = std::exp(-p[1] * t);
    g[0] = e;
    g[1] = -p[0] * t * e;
    g[2] = 1.0;
  };
  return m;
}

ModelFunction ramsey_model() {
  ModelFunction m;
  m.n_params = 5;
  m.value = [](double t, std::span<const double> p) {
    return p[4] + p[0] * std::exp(-t / p[1]) * std::cos(kTwoPi * p[2] * t + p[3]);
  };
  m.gradient = [](double t, std::span<const double> p, std::span<double> g) {
    const double env = std::exp(-t / p[1]);
    const double arg = kTwoPi * p[2] * t + p[3];
    const double c = std::cos(arg);
    const double s = std::sin(arg);
    g[0] = env * c;
    g[1] = p[0] * env * c * t / (p[1] * p[1]);
    g[2] = -p[0] * env * s * kTwoPi * t;
    g[3] = -p[0] * env * s;
    g[4] = 1.0;
  };
  return m;
}

ModelFunction linear_model() {
  ModelFunction m;
  m.n_params = 2;
  m.value = [](double x, std::span<const double> p) { return p[0] * x + p[1]; };
  m.gradient = [](double x, std::span<const double>, std::span<double> g) {
    g[0] = x;
    g[1] = 1.0;
  };
  return m;
}

ModelFunction recovery_model(double coupling, double s, double r) {
  ModelFunction m;
  m.n_params = 2;
  m.value = [=](double t, std::span<const double> p) {
    return gamma_recovery_gradient(coupling, p[0], p[1], s, r, t).value;
  };
  m.gradient = [=](double t, std::span<const double> p, std::span<double> g) {
    const auto d = gamma_recovery_gradient(coupling, p[0], p[1], s, r, t);
    g[0] = d.d_x_in;
    g[1] = d.d_gamma0;
  };
  return m;
}

ModelFunction recovery_model_free_s(double coupling, double r) {
  ModelFunction m;
  m.n_params = 3;
  m.value = [=](double t, std::span<const double> p) {
    return gamma_recovery_gradient(coupling, p[0], p[1], p[2], r, t).value;
  };
  m.gradient = [=](double t, std::span<const double> p, std::span<double> g) {
    const auto d = gamma_recovery_gradient(coupling, p[0], p[1], p[2], r, t);
    g[0] = d.d_x_in;
    g[1] = d.d_gamma0;
    g[2] = d.d_s;
  };
  return m;
}

ExponentialFit fit_exponential(const MeasurementTrace& trace, const ExponentialOptions& opt) {
  trace.validate();
  const auto& t = trace.times;
  const auto& v = trace.values;
  const std::size_t n = t.size();
  if (n < 4) throw InsufficientDataError("fit_exponential: need at least 4 points");

  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double offset = opt.offset;
  if (opt.float_offset) {
    offset = std::accumulate(v.end() - static_cast<std::ptrdiff_t>(tail), v.end(), 0.0) /
             static_cast<double>(tail);
  }
  const double amp = v.front() - offset;
  const double span = t.back() - t.front();
  double gamma_init = 1.0 / span;
  if (amp != 0.0) {
    for (std::size_t i = 1; i < n; ++i) {
      const double frac = (v[i] - offset) / amp;
      if (frac < std::exp(-1.0)) {
        // Interpolate the 1/e crossing in log space between i-1 and i.
        const double prev = std::max((v[i - 1] - offset) / amp, 1e-12);
        const double cur = std::max(frac, 1e-12);
        const double te = t[i - 1] + (t[i] - t[i - 1]) * (std::log(prev) + 1.0) /
                                         std::max(std::log(prev) - std::log(cur), 1e-12);
        gamma_init = 1.0 / std::max(te - t.front(), 1e-3 * (t[i] - t[i - 1]) + 1e-300);
        break;
      }
    }
  }

  ExponentialFit out;
  FitConfig cfg = opt.cfg;
  const FitData data = as_fit_data(trace);
  if (opt.float_offset) {
    cfg.bounds = {Bounds{}, Bounds{0.0}, Bounds{}};
    out.result = best_of(exponential_model(), data,
                         {{amp, gamma_init, offset}, {amp, 0.3 * gamma_init, offset},
                          {amp, 3.0 * gamma_init, offset}},
                         cfg);
    out.gamma = out.result.params[1];
    out.gamma_err = out.result.stderr_[1];
  } else {
    ModelFunction m;
    m.n_params = 2;
    const double b = opt.offset;
    m.value = [b](double x, std::span<const double> p) { return p[0] * std::exp(-p[1] * x) + b; };
    m.gradient = [](double x, std::span<const double> p, std::span<double> g) {
      const double e = std::exp(-p[1] * x);
      g[0] = e;
      g[1] = -p[0] * x * e;
    };
    cfg.bounds = {Bounds{}, Bounds{0.0}};
    out.result = best_of(m, data, {{amp, gamma_init}, {amp, 0.3 * gamma_init}, {amp, 3.0 * gamma_init}},
                         cfg);
    out.gamma = out.result.params[1];
    out.gamma_err = out.result.stderr_[1];
  }
  out.flagged = !out.result.converged || !(out.gamma > 0.0) ||
                !(out.gamma_err <= opt.max_rel_err * out.gamma);
  return out;
}

double spectral_peak_frequency(std::span<const double> t, std::span<const double> v) {
  const std::size_t n = t.size();
  if (n < 8) throw InitializationError("ramsey: too few points for a spectral estimate");
  std::vector<double> steps(n - 1);
  for (std::size_t i = 1; i < n; ++i) steps[i - 1] = t[i] - t[i - 1];
  const double dt = median(steps);
  const double span = t.back() - t.front();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);

  // On a uniform grid the phasor advances by a fixed rotation per sample.
  bool uniform = true;
  for (double s : steps) uniform = uniform && std::abs(s - dt) <= 1e-9 * dt;
  const auto power_at = [&](double f) {
    double sr = 0.0, si = 0.0;
    if (uniform) {
      const double rc = std::cos(kTwoPi * f * dt), rs = -std::sin(kTwoPi * f * dt);
      double re = 1.0, im = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = v[i] - mean;
        sr += d * re;
        si += d * im;
        const double nr = re * rc - im * rs;
        im = re * rs + im * rc;
        re = nr;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double ph = -kTwoPi * f * (t[i] - t.front());
        sr += (v[i] - mean) * std::cos(ph);
        si += (v[i] - mean) * std::sin(ph);
      }
    }
    return sr * sr + si * si;
  };

  // Coarse scan at the natural resolution 1/span, then a 4x finer scan
  // around the strongest bin.
  const double df = 1.0 / span;
  const double f_max = 0.5 / dt;
  const auto n_freq = static_cast<std::size_t>(f_max / df);
  if (n_freq < 8) throw InitializationError("ramsey: frequency grid too coarse");
  std::vector<double> power(n_freq);
  for (std::size_t k = 0; k < n_freq; ++k) power[k] = power_at(df * static_cast<double>(k + 1));
  const auto peak_it = std::max_element(power.begin(), power.end());
  const auto k = static_cast<std::size_t>(peak_it - power.begin());
  const double floor = median(power);
  // The peak has to be resolved (more than one period in the window) and
  // stand clear of the spectral floor; a bare decay peaks at the lowest bin.
  if (k == 0 || k + 1 >= n_freq || !(*peak_it > 20.0 * floor)) {
    throw InitializationError("ramsey: no oscillation peak above the noise floor");
  }
  const double f_coarse = df * static_cast<double>(k + 1);
  const double fine_df = 0.25 * df;
  std::vector<double> fine(9);
  for (std::size_t j = 0; j < fine.size(); ++j) {
    fine[j] = power_at(f_coarse + (static_cast<double>(j) - 4.0) * fine_df);
  }
  const auto j = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(std::max_element(fine.begin(), fine.end()) - fine.begin(), 1, 7));
  // Parabolic refinement on the log power.
  const double a = std::log(fine[j - 1]);
  const double b = std::log(fine[j]);
  const double c = std::log(fine[j + 1]);
  const double denom = a - 2.0 * b + c;
  const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  return f_coarse + (static_cast<double>(j) - 4.0 + std::clamp(shift, -0.5, 0.5)) * fine_df;
}

RamseyFit fit_ramsey(const MeasurementTrace& trace, const FitConfig& base_cfg) {
  trace.validate();
  const auto& t = trace.times;
  const auto& v = trace.values;
  const double f0 = spectral_peak_frequency(t, v);
  const double span = t.back() - t.front();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double amp = 0.5 * (*hi - *lo);

  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < t.size(); ++i) {
    acc += (v[i] - mean) * std::polar(1.0, -kTwoPi * f0 * t[i]);
  }
  const double phase = std::arg(acc);

  FitConfig cfg = base_cfg;
  const double inf = std::numeric_limits<double>::infinity();
  cfg.bounds = {Bounds{0.0, inf}, Bounds{1e-6 * span, inf}, Bounds{0.0, inf}, Bounds{}, Bounds{}};
  std::vector<std::vector<double>> starts;
  for (double frac : {0.1, 0.3, 1.0}) starts.push_back({amp, frac * span, f0, phase, mean});

  RamseyFit out;
  out.result = best_of(ramsey_model(), as_fit_data(trace), starts, cfg);
  out.t2_star = out.result.params[1];
  out.t2_star_err = out.result.stderr_[1];
  out.detune = out.result.params[2];
  out.detune_err = out.result.stderr_[2];
  return out;
}

RecoveryFit fit_recovery(std::span<const RatePoint> series, double coupling, double s_fixed,
                         double r_fixed, const FitConfig& base_cfg) {
  if (series.size() < 3) throw InsufficientDataError("fit_recovery: need at least 3 points");
  if (!(s_fixed >= 0.0) || !(r_fixed >= 0.0)) {
    throw DomainError("fit_recovery: s and r must be >= 0");
  }
  std::vector<double> x, y, sig;
  for (const auto& p : series) {
    x.push_back(p.delay);
    y.push_back(p.gamma);
    sig.push_back(p.sigma);
  }
  const std::size_t tail = std::max<std::size_t>(1, series.size() / 5);
  const double g0 = *std::min_element(y.end() - static_cast<std::ptrdiff_t>(tail), y.end());
  const double xin0 =
      std::max((y.front() - g0) / coupling * std::exp(std::min(s_fixed * x.front(), 700.0)), 1e-9);

  FitConfig cfg = base_cfg;
  cfg.bounds = {Bounds{0.0, 1.0}, Bounds{0.0, std::numeric_limits<double>::infinity()}};
  const ModelFunction model = recovery_model(coupling, s_fixed, r_fixed);
  const FitData data{x, y, sig};

  std::vector<std::vector<double>> starts{{xin0, g0}};
  if (r_fixed > 0.0) {
    // Recombination shortens the transient, so a larger injection is needed
    // to reproduce the same early rates. Seed from the best coarse guess.
    double best_chi2 = std::numeric_limits<double>::infinity();
    double best_xin = xin0;
    for (double mult = 1.0; mult <= 1e4; mult *= 3.0) {
      const double cand = std::min(xin0 * mult, 1.0);
      double chi2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = (y[i] - model.value(x[i], std::vector<double>{cand, g0})) / sig[i];
        chi2 += r * r;
      }
      if (chi2 < best_chi2) {
        best_chi2 = chi2;
        best_xin = cand;
      }
    }
    starts.push_back({best_xin, g0});
  }

  RecoveryFit out;
  out.result = best_of(model, data, starts, cfg);
  out.x_in = out.result.params[0];
  out.x_in_err = out.result.stderr_[0];
  out.gamma0 = out.result.params[1];
  out.gamma0_err = out.result.stderr_[1];
  return out;
}

TrappingFit fit_recovery_free_s(std::span<const RatePoint> series, double coupling, double r_fixed,
                                const FitConfig& base_cfg) {
  if (series.size() < 4) throw InsufficientDataError("fit_recovery_free_s: need at least 4 points");
  std::vector<double> x, y, sig;
  for (const auto& p : series) {
    x.push_back(p.delay);
    y.push_back(p.gamma);
    sig.push_back(p.sigma);
  }
  const std::size_t tail = std::max<std::size_t>(1, series.size() / 5);
  const double g0 = *std::min_element(y.end() - static_cast<std::ptrdiff_t>(tail), y.end());

  // Log-linear slope over points clearly above the baseline.
  double s0 = 3.0 / std::max(x.back() - x.front(), 1e-300);
  {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double excess = y[i] - g0;
      if (excess > 2.0 * sig[i]) {
        const double w = (excess / sig[i]) * (excess / sig[i]);
        const double ly = std::log(excess);
        sw += w;
        sx += w * x[i];
        sy += w * ly;
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * ly;
        ++used;
      }
    }
    const double det = sw * sxx - sx * sx;
    if (used >= 2 && det > 0.0) {
      const double slope = (sw * sxy - sx * sy) / det;
      if (slope < 0.0) s0 = -slope;
    }
  }
  const double xin0 = std::max((y.front() - g0) / coupling * std::exp(std::min(s0 * x.front(), 700.0)), 1e-9);

  FitConfig cfg = base_cfg;
  const double inf = std::numeric_limits<double>::infinity();
  cfg.bounds = {Bounds{0.0, 1.0}, Bounds{0.0, inf}, Bounds{0.0, inf}};
  TrappingFit out;
  out.recovery.result = best_of(recovery_model_free_s(coupling, r_fixed), FitData{x, y, sig},
                                {{xin0, g0, s0}, {xin0, g0, 0.5 * s0}, {xin0, g0, 2.0 * s0}}, cfg);
  const auto& p = out.recovery.result.params;
  const auto& e = out.recovery.result.stderr_;
  out.recovery.x_in = p[0];
  out.recovery.x_in_err = e[0];
  out.recovery.gamma0 = p[1];
  out.recovery.gamma0_err = e[1];
  out.s = p[2];
  out.s_err = e[2];
  return out;
}

LinearFit fit_linear_weighted(std::span<const double> x, std::span<const double> y,
                              std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (y.size() != n || sigma.size() != n) throw DomainError("fit_linear_weighted: column lengths differ");
  if (n < 2) throw InsufficientDataError("fit_linear_weighted: need at least 2 points");
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  if (*xmin == *xmax) throw DegenerateDesignError("fit_linear_weighted: all x values coincide");

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma[i] > 0.0)) throw DomainError("fit_linear_weighted: sigma must be positive");
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    swx += w * x[i];
    swy += w * y[i];
  }
  const double xbar = swx / sw;
  const double ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sxx += w * (x[i] - xbar) * (x[i] - xbar);
    sxy += w * (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw DegenerateDesignError("fit_linear_weighted: zero spread in x");

  LinearFit out;
  out.slope = sxy / sxx;
  out.intercept = ybar - out.slope * xbar;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (y[i] - out.slope * x[i] - out.intercept) / sigma[i];
    chi2 += r * r;
  }
  auto& res = out.result;
  res.dof = static_cast<int>(n) - 2;
  res.chi2 = chi2;
  res.converged = true;
  res.chi2_history = {chi2};
  const double inflation = res.dof > 0 ? std::max(1.0, chi2 / res.dof) : 1.0;
  res.covariance.resize(2, 2);
  res.covariance << inflation / sxx, -inflation * xbar / sxx, -inflation * xbar / sxx,
      inflation * (1.0 / sw + xbar * xbar / sxx);
  res.params = {out.slope, out.intercept};
  res.stderr_ = {std::sqrt(res.covariance(0, 0)), std::sqrt(res.covariance(1, 1))};
  res.at_bound = {false, false};
  out.slope_err = res.stderr_[0];
  out.intercept_err = res.stderr_[1];
  return out;
}

}  // namespace qpdyn::fit

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

// Weighted nonlinear least squares (Levenberg-Marquardt) and the model fits
// used by the analysis pipeline.

#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qpdyn/trace.hpp"

namespace qpdyn::fit {

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct FitConfig {
  int max_iter = 200;
  double grad_tol = 1e-10;  // predicted fractional chi^2 reduction of a full step
  double step_tol = 1e-12;  // relative parameter change
  double damping_init = 1e-3;
  double damping_up = 10.0;
  double damping_down = 10.0;
  /// Empty, or one entry per parameter.
  std::vector<Bounds> bounds;

  void validate(std::size_t n_params) const;
};

struct FitResult {
  std::vector<double> params;
  std::vector<double> stderr_;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  int dof = 0;
  bool converged = false;
  int n_iter = 0;
  /// Relative gradient measure at the returned point (see grad_tol).
  double gradient_norm = 0.0;
  /// chi2 after every accepted step, starting with the initial value.
  std::vector<double> chi2_history;
  /// Parameters sitting on a bound at the solution.
  std::vector<bool> at_bound;

  double reduced_chi2() const { return dof > 0 ? chi2 / dof : 0.0; }
};

/// A scalar model y = f(x; p). `gradient`, when set, fills df/dp; otherwise
/// the engine differences the model centrally.
struct ModelFunction {
  std::size_t n_params = 0;
  std::function<double(double, std::span<const double>)> value;
  std::function<void(double, std::span<const double>, std::span<double>)> gradient;
};

struct FitData {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> sigma;
};

/// Central-difference gradient of a model, used when no analytic one exists.
void numeric_gradient(const ModelFunction& model, double x,
                      std::span<const double> p, std::span<double> out);

/// Levenberg-Marquardt with Marquardt scaling. Accepted steps never increase
/// chi2. The covariance is the inverse undamped normal matrix at the solution,
/// scaled by chi2/dof when that exceeds one. Throws RankDeficiencyError when
/// the normal matrix is singular; hitting max_iter returns the best point
/// with converged = false.
FitResult nlls_fit(const ModelFunction& model, const FitData& data,
                   std::span<const double> init, const FitConfig& cfg = {});

inline FitData as_fit_data(const MeasurementTrace& trace) {
  return FitData{trace.times, trace.values, trace.sigma};
}

// ---- model fits -----------------------------------------------------------

ModelFunction exponential_model();  // p = {A, Gamma, B}
ModelFunction ramsey_model();       // p = {A, T2*, f, phase, B}
ModelFunction linear_model();       // p = {slope, intercept}
/// p = {x_in, Gamma0}, with coupling, s and r held fixed.
ModelFunction recovery_model(double coupling, double s, double r);
/// p = {x_in, Gamma0, s}, with r held fixed.
ModelFunction recovery_model_free_s(double coupling, double r);

struct ExponentialFit {
  double gamma = 0.0;
  double gamma_err = 0.0;
  /// Relative error above the identifiability threshold or fit not converged.
  bool flagged = false;
  FitResult result;
};

struct ExponentialOptions {
  bool float_offset = true;
  /// Fixed offset used when float_offset is false.
  double offset = 0.0;
  /// gamma_err / gamma above this marks the trace as unidentifiable.
  double max_rel_err = 0.25;
  FitConfig cfg{};
};

/// A exp(-Gamma t) + B. Initial B is the mean of the last 10% of points.
ExponentialFit fit_exponential(const MeasurementTrace& trace,
                               const ExponentialOptions& opt = {});

struct RamseyFit {
  double t2_star = 0.0;
  double t2_star_err = 0.0;
  double detune = 0.0;
  double detune_err = 0.0;
  FitResult result;
};

/// Strongest periodogram peak on a frequency grid up to the sampling
/// Nyquist. Throws InitializationError when there is no interior peak well
/// above the spectral noise floor.
double spectral_peak_frequency(std::span<const double> t, std::span<const double> v);

/// B + A exp(-t/T2*) cos(2 pi f t + phase); f initialized from the spectrum.
RamseyFit fit_ramsey(const MeasurementTrace& trace, const FitConfig& cfg = {});

struct RatePoint {
  double delay = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
};

struct RecoveryFit {
  double x_in = 0.0;
  double x_in_err = 0.0;
  double gamma0 = 0.0;
  double gamma0_err = 0.0;
  FitResult result;
};

/// Weighted fit of the recovery model with (x_in, Gamma0) free.
RecoveryFit fit_recovery(std::span<const RatePoint> series, double coupling,
                         double s_fixed, double r_fixed, const FitConfig& cfg = {});

struct TrappingFit {
  double s = 0.0;
  double s_err = 0.0;
  RecoveryFit recovery;
};

/// Same model with s free as well; used on low-density data.
TrappingFit fit_recovery_free_s(std::span<const RatePoint> series, double coupling,
                                double r_fixed, const FitConfig& cfg = {});

struct LinearFit {
  double slope = 0.0;
  double slope_err = 0.0;
  double intercept = 0.0;
  double intercept_err = 0.0;
  FitResult result;
};

/// Closed-form weighted least squares. Throws DegenerateDesignError when all
/// x coincide and InsufficientDataError for fewer than two points.
LinearFit fit_linear_weighted(std::span<const double> x, std::span<const double> y,
                              std::span<const double> sigma);

}  // namespace qpdyn::fit

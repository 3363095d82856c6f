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

#include <cmath>
#include <random>

#include "doctest.h"
#include "qpdyn/errors.hpp"
#include "qpdyn/fit.hpp"
#include "qpdyn/model.hpp"
#include "qpdyn/util.hpp"

using namespace qpdyn;
using namespace qpdyn::fit;

namespace {

MeasurementTrace sampled(const ModelFunction& m, const std::vector<double>& p, std::vector<double> t,
                         double sigma, std::uint64_t noise_seed = 0) {
  MeasurementTrace tr;
  tr.times = std::move(t);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double x : tr.times) {
    tr.values.push_back(m.value(x, p) + (noise_seed ? n(rng) : 0.0));
    tr.sigma.push_back(sigma);
  }
  return tr;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

void check_gradient(const ModelFunction& m, const std::vector<double>& p, const std::vector<double>& xs) {
  std::vector<double> g(m.n_params), fd(m.n_params);
  for (double x : xs) {
    m.gradient(x, p, g);
    numeric_gradient(m, x, p, fd);
    for (std::size_t k = 0; k < m.n_params; ++k) {
      const double scale = std::max(std::abs(fd[k]), 1e-8 * std::abs(m.value(x, p)) / std::max(std::abs(p[k]), 1e-300));
      CHECK(std::abs(g[k] - fd[k]) <= 1e-6 * scale);
    }
  }
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("noiseless exponential round trip") {
  const auto tr = sampled(exponential_model(), {0.95, 2.3e5, 0.02}, linspace(0.0, 30e-6, 60), 0.01);
  const auto f = fit_exponential(tr);
  CHECK(f.result.converged);
  CHECK(rel(f.gamma, 2.3e5) <= 1e-6);
  CHECK(rel(f.result.params[0], 0.95) <= 1e-6);
  CHECK_FALSE(f.flagged);
}

TEST_CASE("fixed-offset exponential") {
  const auto tr = sampled(exponential_model(), {1.0, 1e5, 0.0}, linspace(0.0, 50e-6, 60), 0.01);
  ExponentialOptions opt;
  opt.float_offset = false;
  const auto f = fit_exponential(tr, opt);
  CHECK(f.result.params.size() == 2);
  CHECK(rel(f.gamma, 1e5) <= 1e-6);
}

TEST_CASE("unidentifiable exponential is flagged") {
  // Decay far slower than the window: the rate cannot be pinned down.
  const auto tr = sampled(exponential_model(), {1.0, 10.0, 0.0}, linspace(0.0, 10e-6, 30), 0.05, 3);
  CHECK(fit_exponential(tr).flagged);
}

TEST_CASE("noiseless ramsey round trip") {
  const std::vector<double> p{0.5, 8e-6, 3e6, 0.2, 0.5};
  const auto tr = sampled(ramsey_model(), p, linspace(0.0, 24e-6, 400), 0.01);
  const auto f = fit_ramsey(tr);
  CHECK(f.result.converged);
  CHECK(rel(f.t2_star, 8e-6) <= 1e-6);
  CHECK(rel(f.detune, 3e6) <= 1e-6);
}

TEST_CASE("noiseless recovery round trip") {
  const double c = 4.86e10;
  for (double r : {0.0, 2e6}) {
    const auto m = recovery_model(c, 9e3, r);
    std::vector<RatePoint> pts;
    for (double t : linspace(10e-6, 1e-3, 60)) {
      const double g = m.value(t, std::vector<double>{1e-3, 1e5});
      pts.push_back({t, g, 1e-3 * g});
    }
    const auto f = fit_recovery(pts, c, 9e3, r);
    CHECK(f.result.converged);
    CHECK(rel(f.x_in, 1e-3) <= 1e-6);
    CHECK(rel(f.gamma0, 1e5) <= 1e-6);
  }
}

TEST_CASE("noiseless free-s recovery round trip") {
  const double c = 4.86e10;
  const auto m = recovery_model_free_s(c, 0.0);
  std::vector<RatePoint> pts;
  for (double t : linspace(10e-6, 1e-3, 60)) {
    const double g = m.value(t, std::vector<double>{5e-5, 1e5, 9e3});
    pts.push_back({t, g, 1e-3 * g});
  }
  const auto f = fit_recovery_free_s(pts, c, 0.0);
  CHECK(rel(f.s, 9e3) <= 1e-6);
  CHECK(rel(f.recovery.x_in, 5e-5) <= 1e-6);
}

TEST_CASE("weighted linear fit") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y, s(5, 0.1);
  for (double v : x) y.push_back(2.5 * v - 1.0);
  const auto f = fit_linear_weighted(x, y, s);
  CHECK(rel(f.slope, 2.5) <= 1e-12);
  CHECK(rel(f.intercept, -1.0) <= 1e-12);
  const std::vector<double> same{1, 1, 1};
  const std::vector<double> y3{1, 2, 3}, s3{1, 1, 1};
  CHECK_THROWS_AS(fit_linear_weighted(same, y3, s3), DegenerateDesignError);
  CHECK_THROWS_AS(fit_linear_weighted(std::span(x).first(1), std::span(y).first(1), std::span(s).first(1)),
                  InsufficientDataError);
}

TEST_CASE("linear model through the iterative engine") {
  const auto tr = sampled(linear_model(), {3.0, -0.5}, linspace(0.0, 1.0, 20), 0.1);
  const std::vector<double> init{1.0, 0.0};
  const auto r = nlls_fit(linear_model(), as_fit_data(tr), init);
  CHECK(rel(r.params[0], 3.0) <= 1e-6);
  CHECK(rel(r.params[1], -0.5) <= 1e-6);
}

TEST_CASE("analytic gradients agree with finite differences") {
  check_gradient(exponential_model(), {0.9, 2e5, 0.05}, {0.0, 1e-6, 5e-6, 2e-5});
  check_gradient(ramsey_model(), {0.5, 8e-6, 3e6, 0.3, 0.5}, {0.0, 1e-7, 2e-6, 9e-6});
  check_gradient(linear_model(), {2.0, 1.0}, {-1.0, 0.0, 3.0});
  check_gradient(recovery_model(4.86e10, 9e3, 1e6), {1e-4, 1e5}, {1e-5, 1e-4, 5e-4});
  check_gradient(recovery_model_free_s(4.86e10, 1e6), {1e-4, 1e5, 9e3}, {1e-5, 1e-4, 5e-4});
}

TEST_CASE("accepted steps never increase chi2") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto tr = sampled(exponential_model(), {0.9, 2e5, 0.05}, linspace(0.0, 30e-6, 50), 0.01, seed);
    const std::vector<double> init{0.5, 1e4, 0.0};
    const auto r = nlls_fit(exponential_model(), as_fit_data(tr), init);
    REQUIRE(r.chi2_history.size() >= 1);
    for (std::size_t i = 1; i < r.chi2_history.size(); ++i) {
      CHECK(r.chi2_history[i] <= r.chi2_history[i - 1]);
    }
    CHECK(r.chi2 == doctest::Approx(r.chi2_history.back()));
  }
}

TEST_CASE("rank-deficient model is rejected") {
  ModelFunction m;
  m.n_params = 2;
  m.value = [](double x, std::span<const double> p) { return (p[0] + p[1]) * x; };
  const auto tr = sampled(linear_model(), {1.0, 0.0}, linspace(0.0, 1.0, 10), 0.1);
  const std::vector<double> init{0.3, 0.3};
  CHECK_THROWS_AS(nlls_fit(m, as_fit_data(tr), init), RankDeficiencyError);
}

TEST_CASE("bounds are respected") {
  const auto tr = sampled(linear_model(), {2.0, 1.0}, linspace(0.0, 1.0, 10), 0.1);
  FitConfig cfg;
  cfg.bounds = {Bounds{0.0, 1.5}, Bounds{}};
  const std::vector<double> init{1.0, 0.0};
  const auto r = nlls_fit(linear_model(), as_fit_data(tr), init, cfg);
  CHECK(r.params[0] <= 1.5);
  CHECK(r.at_bound[0]);
}

TEST_CASE("covariance is inflated by the reduced chi2 above one") {
  const auto tr = sampled(linear_model(), {2.0, 1.0}, linspace(0.0, 1.0, 40), 0.1, 5);
  auto loose = tr;
  for (auto& s : loose.sigma) s = 0.02;  // understated errors
  const std::vector<double> init{1.0, 0.0};
  const auto a = nlls_fit(linear_model(), as_fit_data(tr), init);
  const auto b = nlls_fit(linear_model(), as_fit_data(loose), init);
  CHECK(b.reduced_chi2() > 1.0);
  // Rescaling every sigma by 1/5 leaves the inflated errors unchanged.
  const double a_raw = a.stderr_[0] / std::sqrt(std::max(1.0, a.reduced_chi2()));
  CHECK(b.stderr_[0] == doctest::Approx(a_raw * std::sqrt(a.reduced_chi2())).epsilon(1e-6));
}

TEST_CASE("config validation") {
  FitConfig cfg;
  cfg.bounds = {Bounds{}};
  CHECK_THROWS(cfg.validate(2));
  cfg.bounds = {Bounds{1.0, 0.0}, Bounds{}};
  CHECK_THROWS(cfg.validate(2));
}

}

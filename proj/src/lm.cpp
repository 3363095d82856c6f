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
#include <limits>
#include <string>

#include "qpdyn/errors.hpp"
#include "qpdyn/fit.hpp"

namespace qpdyn::fit {

namespace {

constexpr double kMaxDamping = 1e16;
// Smallest eigenvalue of the correlation-scaled normal matrix we still invert.
constexpr double kRankTol = 1e-13;

struct Linearization {
  Eigen::VectorXd residual;  // (y - f) / sigma
  Eigen::MatrixXd jac;       // (df/dp) / sigma
  double chi2 = 0.0;
};

double clamp_to(double v, const Bounds& b) { return std::clamp(v, b.lower, b.upper); }

class Problem {
 public:
  Problem(const ModelFunction& model, const FitData& data, const FitConfig& cfg)
      : model_(model), data_(data), cfg_(cfg) {}

  double chi2(std::span<const double> p) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < data_.x.size(); ++i) {
      const double r = (data_.y[i] - model_.value(data_.x[i], p)) / data_.sigma[i];
      sum += r * r;
    }
    return sum;
  }

  Linearization linearize(std::span<const double> p) const {
    const std::size_t m = data_.x.size();
    const std::size_t n = p.size();
    Linearization lin;
    lin.residual.resize(static_cast<Eigen::Index>(m));
    lin.jac.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < m; ++i) {
      const double inv_sigma = 1.0 / data_.sigma[i];
      const double f = model_.value(data_.x[i], p);
      lin.residual(static_cast<Eigen::Index>(i)) = (data_.y[i] - f) * inv_sigma;
      if (model_.gradient) {
        model_.gradient(data_.x[i], p, grad);
      } else {
        numeric_gradient(model_, data_.x[i], p, grad);
      }
      for (std::size_t j = 0; j < n; ++j) {
        lin.jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = grad[j] * inv_sigma;
      }
    }
    lin.chi2 = lin.residual.squaredNorm();
    return lin;
  }

  const Bounds* bound(std::size_t j) const {
    return cfg_.bounds.empty() ? nullptr : &cfg_.bounds[j];
  }

 private:
  const ModelFunction& model_;
  const FitData& data_;
  const FitConfig& cfg_;
};

// Parameters pinned at a bound whose descent direction points outward.
std::vector<bool> active_set(const Problem& prob, std::span<const double> p,
                             const Eigen::VectorXd& descent) {
  std::vector<bool> active(p.size(), false);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const Bounds* b = prob.bound(j);
    if (!b) continue;
    const double g = descent(static_cast<Eigen::Index>(j));
    if ((p[j] <= b->lower && g < 0.0) || (p[j] >= b->upper && g > 0.0)) active[j] = true;
  }
  return active;
}

// Gauss-Newton decrement over the free parameters, relative to chi^2 plus a
// round-off floor: the fraction of chi^2 a full undamped step would remove.
double relative_gradient(const Linearization& lin, const std::vector<bool>& active,
                         double chi2_floor) {
  std::vector<Eigen::Index> free_idx;
  for (std::size_t j = 0; j < active.size(); ++j) {
    if (!active[j] && lin.jac.col(static_cast<Eigen::Index>(j)).squaredNorm() > 0.0) {
      free_idx.push_back(static_cast<Eigen::Index>(j));
    }
  }
  if (free_idx.empty()) return 0.0;
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  Eigen::MatrixXd j(lin.jac.rows(), nf);
  for (Eigen::Index a = 0; a < nf; ++a) j.col(a) = lin.jac.col(free_idx[a]);
  // Least-squares projection of the residual onto the Jacobian range.
  const Eigen::VectorXd step = j.colPivHouseholderQr().solve(lin.residual);
  const double decrement = (j * step).squaredNorm();
  return decrement / (lin.chi2 + chi2_floor);
}

}  // namespace

void FitConfig::validate(std::size_t n_params) const {
  if (max_iter <= 0 || !(grad_tol > 0.0) || !(step_tol > 0.0) || !(damping_init > 0.0) ||
      !(damping_up > 1.0) || !(damping_down > 1.0)) {
    throw DomainError("fit config: tolerances and damping factors must be positive");
  }
  if (!bounds.empty() && bounds.size() != n_params) {
    throw DomainError("fit config: bounds size does not match parameter count");
  }
  for (const auto& b : bounds) {
    if (!(b.lower <= b.upper)) throw DomainError("fit config: lower bound above upper");
  }
}

void numeric_gradient(const ModelFunction& model, double x, std::span<const double> p,
                      std::span<double> out) {
  std::vector<double> q(p.begin(), p.end());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double h = 6e-6 * (p[j] != 0.0 ? std::abs(p[j]) : 1e-8);
    q[j] = p[j] + h;
    const double up = model.value(x, q);
    q[j] = p[j] - h;
    const double down = model.value(x, q);
    q[j] = p[j];
    out[j] = (up - down) / (2.0 * h);
  }
}

FitResult nlls_fit(const ModelFunction& model, const FitData& data,
                   std::span<const double> init, const FitConfig& cfg) {
  const std::size_t n = model.n_params;
  const std::size_t m = data.x.size();
  if (init.size() != n) throw DomainError("nlls_fit: initial vector has wrong length");
  if (data.y.size() != m || data.sigma.size() != m) {
    throw DomainError("nlls_fit: data columns differ in length");
  }
  if (m < n) {
    throw InsufficientDataError("nlls_fit: " + std::to_string(m) + " points for " +
                                std::to_string(n) + " parameters");
  }
  for (double s : data.sigma) {
    if (!(s > 0.0)) throw DomainError("nlls_fit: sigma must be positive");
  }
  cfg.validate(n);

  const Problem prob(model, data, cfg);
  double chi2_floor = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double z = data.y[i] / data.sigma[i];
    chi2_floor += z * z;
  }
  chi2_floor = std::max(chi2_floor * std::numeric_limits<double>::epsilon(),
                        std::numeric_limits<double>::min());
  std::vector<double> p(init.begin(), init.end());
  for (std::size_t j = 0; j < n; ++j) {
    if (const Bounds* b = prob.bound(j)) p[j] = clamp_to(p[j], *b);
  }

  FitResult res;
  Linearization lin = prob.linearize(p);
  if (!std::isfinite(lin.chi2)) throw DomainError("nlls_fit: model not finite at the start point");
  res.chi2_history.push_back(lin.chi2);

  double lambda = cfg.damping_init;
  bool grad_ok = false;
  int iter = 0;
  std::vector<double> trial(n);

  while (iter < cfg.max_iter) {
    Eigen::VectorXd descent = lin.jac.transpose() * lin.residual;
    const auto active = active_set(prob, p, descent);
    if (relative_gradient(lin, active, chi2_floor) <= cfg.grad_tol) {
      grad_ok = true;
      break;
    }
    ++iter;

    std::vector<Eigen::Index> free_idx;
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j]) free_idx.push_back(static_cast<Eigen::Index>(j));
    }
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd normal(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      rhs(a) = descent(free_idx[a]);
      for (Eigen::Index b = 0; b < nf; ++b) {
        normal(a, b) = lin.jac.col(free_idx[a]).dot(lin.jac.col(free_idx[b]));
      }
    }
    const double diag_floor = std::max(normal.diagonal().maxCoeff(), 1.0) * 1e-30;

    bool accepted = false;
    bool step_small = false;
    while (!accepted) {
      Eigen::MatrixXd damped = normal;
      for (Eigen::Index a = 0; a < nf; ++a) {
        damped(a, a) += lambda * std::max(normal(a, a), diag_floor);
      }
      const Eigen::VectorXd step = damped.ldlt().solve(rhs);

      double step_norm = 0.0;
      double p_norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) trial[j] = p[j];
      for (Eigen::Index a = 0; a < nf; ++a) {
        const auto j = static_cast<std::size_t>(free_idx[a]);
        double v = p[j] + (std::isfinite(step(a)) ? step(a) : 0.0);
        if (const Bounds* b = prob.bound(j)) v = clamp_to(v, *b);
        trial[j] = v;
      }
      for (std::size_t j = 0; j < n; ++j) {
        step_norm += (trial[j] - p[j]) * (trial[j] - p[j]);
        p_norm += p[j] * p[j];
      }
      step_norm = std::sqrt(step_norm);
      p_norm = std::sqrt(p_norm);
      step_small = step_norm <= cfg.step_tol * (p_norm + cfg.step_tol);

      const double chi2_trial = prob.chi2(trial);
      if (std::isfinite(chi2_trial) && chi2_trial < lin.chi2) {
        accepted = true;
        p = trial;
        lin = prob.linearize(p);
        res.chi2_history.push_back(lin.chi2);
        lambda = std::max(lambda / cfg.damping_down, 1e-15);
      } else {
        lambda *= cfg.damping_up;
        if (step_small || lambda > kMaxDamping) break;
      }
    }
    if (step_small || !accepted) break;
  }

  // Final state.
  Eigen::VectorXd descent = lin.jac.transpose() * lin.residual;
  const auto active = active_set(prob, p, descent);
  if (!grad_ok) grad_ok = relative_gradient(lin, active, chi2_floor) <= cfg.grad_tol;
  res.gradient_norm = relative_gradient(lin, active, chi2_floor);

  const Eigen::MatrixXd normal = lin.jac.transpose() * lin.jac;
  Eigen::VectorXd scale(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    const double d = normal(j, j);
    if (!(d > 0.0)) {
      throw RankDeficiencyError("nlls_fit: parameter " + std::to_string(j) +
                                " has no influence on the model at the solution");
    }
    scale(j) = 1.0 / std::sqrt(d);
  }
  const Eigen::MatrixXd corr = scale.asDiagonal() * normal * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.eigenvalues().minCoeff() < kRankTol * eig.eigenvalues().maxCoeff()) {
    throw RankDeficiencyError("nlls_fit: normal matrix is singular at the solution");
  }
  const Eigen::MatrixXd corr_inv =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();

  res.params = p;
  res.chi2 = lin.chi2;
  res.dof = static_cast<int>(m) - static_cast<int>(n);
  res.n_iter = iter;
  res.converged = grad_ok;
  const double inflation = res.dof > 0 ? std::max(1.0, res.chi2 / res.dof) : 1.0;
  res.covariance = inflation * (scale.asDiagonal() * corr_inv * scale.asDiagonal());
  res.covariance = 0.5 * (res.covariance + res.covariance.transpose());
  res.stderr_.resize(n);
  res.at_bound.assign(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    res.stderr_[j] = std::sqrt(std::max(res.covariance(jj, jj), 0.0));
    if (const Bounds* b = prob.bound(j)) res.at_bound[j] = p[j] <= b->lower || p[j] >= b->upper;
  }
  return res;
}

}  // namespace qpdyn::fit

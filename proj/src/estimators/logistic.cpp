#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "seqpi/error.hpp"
#include "seqpi/estimators.hpp"
#include "seqpi/kernels.hpp"
#include "seqpi/math.hpp"

namespace seqpi {
namespace {

// Weighted Gram matrix X' diag(w) X and vector X' r, one kernel call per entry.
Eigen::MatrixXd gram(const DesignMatrix& d, std::span<const double> w) {
  const auto p = static_cast<Eigen::Index>(d.cols());
  Eigen::MatrixXd g(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      g(i, j) = g(j, i) = kernels::weighted_dot(w, d.column(i), d.column(j));
    }
  }
  return g;
}

Eigen::VectorXd cross(const DesignMatrix& d, std::span<const double> r) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(d.cols()));
  for (std::size_t j = 0; j < d.cols(); ++j) out(static_cast<Eigen::Index>(j)) = kernels::dot(d.column(j), r);
  return out;
}

void linear_predictors(const DesignMatrix& d, const Eigen::VectorXd& beta, std::vector<double>& eta) {
  std::fill(eta.begin(), eta.end(), 0.0);
  for (std::size_t j = 0; j < d.cols(); ++j) {
    kernels::axpy(beta(static_cast<Eigen::Index>(j)), d.column(j), eta);
  }
}

double log_likelihood(std::span<const double> eta, std::span<const double> y,
                      std::span<const double> w) {
  double ll = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    // log(1 + exp(eta)) computed stably.
    const double e = eta[i];
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += w[i] * (y[i] * e - softplus);
  }
  return ll;
}

}  // namespace

DesignMatrix::DesignMatrix(std::vector<std::string> features)
    : features_(std::move(features)), columns_(features_.size()) {
  if (features_.empty()) throw UsageError("design matrix needs at least one feature");
}

void DesignMatrix::add_row(std::span<const double> x, double label, double weight) {
  if (x.size() != features_.size()) {
    throw UsageError(fmt::format("design row has {} values for {} features", x.size(),
                                 features_.size()));
  }
  for (std::size_t j = 0; j < x.size(); ++j) columns_[j].push_back(x[j]);
  labels_.push_back(label);
  weights_.push_back(weight);
}

double LogisticModel::linear_predictor(std::span<const double> x) const {
  if (x.size() != coef.size()) {
    throw UsageError(fmt::format("model expects {} features, got {}", coef.size(), x.size()));
  }
  return kernels::dot(coef, x);
}

double LogisticModel::predict(std::span<const double> x) const {
  return logistic(linear_predictor(x));
}

LogisticModel fit_logistic(const DesignMatrix& d, const FitOptions& options) {
  const std::size_t n = d.rows();
  if (n == 0) throw UsageError("fit_logistic: no rows");
  const auto y = d.labels();
  const auto w = d.weights();
  double total_w = 0.0, total_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0)) throw UsageError("fit_logistic: labels must lie in [0, 1]");
    if (!(w[i] >= 0.0)) throw UsageError("fit_logistic: weights must be non-negative");
    total_w += w[i];
    total_y += w[i] * y[i];
  }
  if (!(total_w > 0.0)) throw UsageError("fit_logistic: total weight is zero");
  if (total_y <= 0.0 || total_y >= total_w) {
    throw SeparationError(fmt::format("fit_logistic: degenerate labels (weighted mean {})",
                                      total_y / total_w));
  }

  const auto p = static_cast<Eigen::Index>(d.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  std::vector<double> eta(n), mu(n), resid(n), hw(n);
  linear_predictors(d, beta, eta);
  double ll = log_likelihood(eta, y, w);

  LogisticModel model;
  model.features = d.features();
  model.n = static_cast<std::int64_t>(n);
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      mu[i] = logistic(eta[i]);
      resid[i] = w[i] * (y[i] - mu[i]);
      hw[i] = w[i] * mu[i] * (1.0 - mu[i]);
    }
    const Eigen::VectorXd grad = cross(d, resid);
    const double grad_norm = grad.norm() / total_w;
    if (grad_norm <= options.tolerance) {
      // Complete separation: Newton drifts slowly and the gradient vanishes
      // long before the norm diverges, leaving every binary label fitted.
      bool perfect = true;
      for (std::size_t i = 0; i < n && perfect; ++i) {
        if (w[i] <= 0.0) continue;
        perfect = (y[i] == 0.0 || y[i] == 1.0) && std::abs(y[i] - mu[i]) < 1e-6;
      }
      if (perfect) {
        throw SeparationError(fmt::format(
            "fit_logistic: every label is fitted with probability 0 or 1 (perfect separation, "
            "coefficient norm {:.3g})",
            beta.norm()));
      }
      model.coef.assign(beta.data(), beta.data() + p);
      model.fitted = true;
      model.iterations = iter;
      model.grad_norm = grad_norm;
      return model;
    }
    if (iter == options.max_iter) break;

    Eigen::MatrixXd h = gram(d, hw);
    h.diagonal().array() += options.ridge * total_w;
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    if (!step.allFinite()) {
      throw ConvergenceError("fit_logistic: singular Hessian (collinear features?)");
    }
    // Step halving until the likelihood does not decrease.
    double t = 1.0;
    Eigen::VectorXd trial;
    double trial_ll = -INFINITY;
    for (int halving = 0; halving < 30; ++halving) {
      trial = beta + t * step;
      linear_predictors(d, trial, eta);
      trial_ll = log_likelihood(eta, y, w);
      if (trial_ll >= ll - 1e-12 * std::abs(ll)) break;
      t *= 0.5;
    }
    beta = trial;
    ll = trial_ll;
    if (beta.norm() > options.max_coef_norm) {
      throw SeparationError(fmt::format(
          "fit_logistic: coefficient norm {:.3g} exceeds {:.3g} (perfect separation)",
          beta.norm(), options.max_coef_norm));
    }
  }
  throw ConvergenceError(fmt::format("fit_logistic: no convergence in {} iterations",
                                     options.max_iter));
}

double LinearModel::predict(std::span<const double> x) const {
  if (x.size() != coef.size()) {
    throw UsageError(fmt::format("model expects {} features, got {}", coef.size(), x.size()));
  }
  return kernels::dot(coef, x);
}

LinearModel fit_linear(const DesignMatrix& d) {
  const std::size_t n = d.rows();
  if (n <= d.cols()) {
    throw UsageError(fmt::format("fit_linear: {} rows for {} features", n, d.cols()));
  }
  const auto w = d.weights();
  const auto y = d.labels();
  Eigen::MatrixXd g = gram(d, w);
  std::vector<double> wy(n);
  double total_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wy[i] = w[i] * y[i];
    total_w += w[i];
  }
  const Eigen::VectorXd beta = g.ldlt().solve(cross(d, wy));
  if (!beta.allFinite()) throw ConvergenceError("fit_linear: singular design");

  std::vector<double> fitted(n);
  linear_predictors(d, beta, fitted);
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) rss += w[i] * (y[i] - fitted[i]) * (y[i] - fitted[i]);

  LinearModel m;
  m.features = d.features();
  m.coef.assign(beta.data(), beta.data() + beta.size());
  m.sigma = std::sqrt(rss / (total_w - static_cast<double>(d.cols())));
  m.n = static_cast<std::int64_t>(n);
  return m;
}

}  // namespace seqpi

#pragma once

#include <vector>

#include "fnmiss/model.hpp"

namespace fnmiss {

// Column indices (0-based) left out of a working model. Fitted coefficients
// are zero-padded at these positions so every model has p rows/entries.
using ColumnSet = std::vector<Eigen::Index>;

struct OutcomeModel {
  Matrix B_hat;          // p x T
  Matrix Sigma_eps_hat;  // T x T
  Eigen::Index n_obs = 0;
  ColumnSet dropped_columns;
};

struct PropensityModel {
  Vector gamma_hat;  // p
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  ColumnSet dropped_columns;
};

inline constexpr double kPropensityClip = 1e-6;

// Multivariate least squares of Y on X over the units with Z = 1.
OutcomeModel fit_ols(const Dataset& ds, const ColumnSet& drop = {});

// Row i of the result is B_hat^T x_i.
Matrix predict(const OutcomeModel& model, const Matrix& X);

// Logistic maximum likelihood for P(Z = 1 | x) by damped Newton from gamma = 0.
PropensityModel fit_logistic(const Dataset& ds, const ColumnSet& drop = {});

double inverse_logit(double s) noexcept;

// inverse_logit(X gamma_hat), clipped into [kPropensityClip, 1 - kPropensityClip].
Vector propensities(const PropensityModel& model, const Matrix& X);

// Bernoulli log-likelihood and its gradient for linear predictor X gamma.
double logistic_log_likelihood(const Matrix& X, const Eigen::VectorXi& Z, const Vector& gamma);
Vector logistic_score(const Matrix& X, const Eigen::VectorXi& Z, const Vector& gamma);

}  // namespace fnmiss

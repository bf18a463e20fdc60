#include "fnmiss/estimators.hpp"

#include <string>

namespace fnmiss {
namespace {

constexpr double kMaxPiCondition = 1e12;

double quadratic_form_inverse_pi(const CovariateMoments& cm) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cm.Pi);
  const Vector& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > kMaxPiCondition) {
    throw Error(ErrorCode::SingularPi, "Pi = n^-1 sum Z_i x_i x_i^T is numerically singular");
  }
  const Vector proj = eig.eigenvectors().transpose() * cm.mu_x;
  return (proj.array().square() / ev.array()).sum();
}

Matrix explained_covariance(const OutcomeModel& om, const CovariateMoments& cm) {
  return om.B_hat.transpose() * cm.Sigma_x * om.B_hat;
}

}  // namespace

Matrix cov_or(const OutcomeModel& om, const CovariateMoments& cm) {
  Matrix C = explained_covariance(om, cm) + quadratic_form_inverse_pi(cm) * om.Sigma_eps_hat;
  symmetrize(C);
  return C;
}

MeanEstimate estimate_or(const Dataset& ds, const OutcomeModel& om) {
  MeanEstimate est;
  est.method = Method::OR;
  est.n = ds.n();
  est.grid = ds.grid;
  est.mu_hat = predict(om, ds.X).colwise().mean().transpose();
  est.C_hat = cov_or(om, covariate_moments(ds));
  return est;
}

DRWeights dr_weights(const Dataset& ds, const Vector& tau) {
  if (tau.size() != ds.n()) {
    throw Error(ErrorCode::DimensionMismatch, "propensity vector has " + std::to_string(tau.size()) +
                                                  " entries for n=" + std::to_string(ds.n()));
  }
  DRWeights dw;
  dw.w = Vector::Zero(ds.n());
  double inv_sum = 0.0;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    inv_sum += 1.0 / tau[i];
    if (ds.Z[i] == 1) dw.w[i] = 1.0 / tau[i];
  }
  dw.mean_inv_tau = inv_sum / static_cast<double>(ds.n());
  return dw;
}

DRWeights dr_weights(const Dataset& ds, const PropensityModel& pm) {
  return dr_weights(ds, propensities(pm, ds.X));
}

Matrix cov_dr(const OutcomeModel& om, const DRWeights& weights, const CovariateMoments& cm) {
  Matrix C = explained_covariance(om, cm) + weights.mean_inv_tau * om.Sigma_eps_hat;
  symmetrize(C);
  return C;
}

Matrix cov_dr(const Dataset& ds, const OutcomeModel& om, const PropensityModel& pm,
              const CovariateMoments& cm) {
  return cov_dr(om, dr_weights(ds, pm), cm);
}

MeanEstimate estimate_dr(const Dataset& ds, const OutcomeModel& om, const DRWeights& weights) {
  const Matrix fitted = predict(om, ds.X);
  Vector total = fitted.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.Z[i] != 1) continue;
    total += weights.w[i] * (ds.Y.row(i) - fitted.row(i)).transpose();
  }

  MeanEstimate est;
  est.method = Method::DR;
  est.n = ds.n();
  est.grid = ds.grid;
  est.mu_hat = total / static_cast<double>(ds.n());
  est.C_hat = cov_dr(om, weights, covariate_moments(ds));
  return est;
}

MeanEstimate estimate_dr(const Dataset& ds, const OutcomeModel& om, const PropensityModel& pm) {
  return estimate_dr(ds, om, dr_weights(ds, pm));
}

MeanEstimate estimate_cc(const Dataset& ds) {
  const auto n_obs = ds.n_observed();
  if (n_obs < 2) {
    throw Error(ErrorCode::InsufficientObserved,
                "complete-case covariance needs 2 observed units, have " + std::to_string(n_obs));
  }
  Matrix Yo(n_obs, ds.T());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.Z[i] == 1) Yo.row(k++) = ds.Y.row(i);
  }

  MeanEstimate est;
  est.method = Method::CC;
  est.n = ds.n();
  est.grid = ds.grid;
  est.mu_hat = Yo.colwise().mean().transpose();
  const Matrix centered = Yo.rowwise() - est.mu_hat.transpose();
  const Matrix sample_cov = centered.transpose() * centered / static_cast<double>(n_obs - 1);
  est.C_hat = static_cast<double>(ds.n()) / static_cast<double>(n_obs) * sample_cov;
  symmetrize(est.C_hat);
  return est;
}

}  // namespace fnmiss

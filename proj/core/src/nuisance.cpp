#include "fnmiss/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fnmiss {
namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kScoreTolerancePerUnit = 1e-10;
constexpr int kMaxNewtonIterations = 100;
constexpr int kMaxHalvings = 60;
constexpr double kSeparationNorm = 1e4;
// Fitted probabilities this close to 0 or 1 mean the maximum sits at infinity.
constexpr double kDegenerateProbability = 1e-10;

std::vector<Eigen::Index> kept_columns(Eigen::Index p, const ColumnSet& drop) {
  for (auto c : drop) {
    if (c < 0 || c >= p) {
      throw Error(ErrorCode::DimensionMismatch, "dropped column " + std::to_string(c) +
                                                    " outside 0.." + std::to_string(p - 1));
    }
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < p; ++c) {
    if (std::find(drop.begin(), drop.end(), c) == drop.end()) kept.push_back(c);
  }
  return kept;
}

std::vector<Eigen::Index> observed_rows(const Eigen::VectorXi& Z) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < Z.size(); ++i) {
    if (Z[i] == 1) rows.push_back(i);
  }
  return rows;
}

ColumnSet normalized(const ColumnSet& drop) {
  ColumnSet out = drop;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// log(1 + e^s) without overflow.
double softplus(double s) noexcept {
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

}  // namespace

double inverse_logit(double s) noexcept {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

OutcomeModel fit_ols(const Dataset& ds, const ColumnSet& drop) {
  const auto kept = kept_columns(ds.p(), drop);
  const auto rows = observed_rows(ds.Z);
  const auto p_kept = static_cast<Eigen::Index>(kept.size());
  const auto n_obs = static_cast<Eigen::Index>(rows.size());
  if (n_obs <= p_kept) {
    throw Error(ErrorCode::InsufficientObserved, std::to_string(n_obs) +
                                                     " observed units for " +
                                                     std::to_string(p_kept) + " covariates");
  }

  const Matrix Xo = ds.X(rows, kept);
  const Matrix Yo = ds.Y(rows, Eigen::all);

  Matrix gram = Xo.transpose() * Xo;
  symmetrize(gram);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw Error(ErrorCode::SingularDesign, "observed Gram matrix condition number exceeds 1e12");
  }

  const Matrix B_kept = Xo.colPivHouseholderQr().solve(Yo);
  const Matrix resid = Yo - Xo * B_kept;

  OutcomeModel m;
  m.n_obs = n_obs;
  m.dropped_columns = normalized(drop);
  m.B_hat = Matrix::Zero(ds.p(), ds.T());
  for (Eigen::Index k = 0; k < p_kept; ++k) m.B_hat.row(kept[k]) = B_kept.row(k);
  m.Sigma_eps_hat = resid.transpose() * resid / static_cast<double>(n_obs - p_kept);
  symmetrize(m.Sigma_eps_hat);
  if (!m.B_hat.allFinite()) throw Error(ErrorCode::SingularDesign, "non-finite coefficients");
  return m;
}

Matrix predict(const OutcomeModel& model, const Matrix& X) {
  if (X.cols() != model.B_hat.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.cols()) +
                                                  " columns, model expects " +
                                                  std::to_string(model.B_hat.rows()));
  }
  return X * model.B_hat;
}

double logistic_log_likelihood(const Matrix& X, const Eigen::VectorXi& Z, const Vector& gamma) {
  const Vector eta = X * gamma;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += Z[i] * eta[i] - softplus(eta[i]);
  return ll;
}

Vector logistic_score(const Matrix& X, const Eigen::VectorXi& Z, const Vector& gamma) {
  const Vector eta = X * gamma;
  Vector r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r[i] = Z[i] - inverse_logit(eta[i]);
  return X.transpose() * r;
}

PropensityModel fit_logistic(const Dataset& ds, const ColumnSet& drop) {
  const auto kept = kept_columns(ds.p(), drop);
  const auto n_obs = ds.n_observed();
  if (n_obs == 0 || n_obs == ds.n()) {
    throw Error(ErrorCode::AllSameIndicator, "all indicators equal " + std::to_string(ds.Z[0]));
  }

  const Matrix Xk = ds.X(Eigen::all, kept);
  const double tol = kScoreTolerancePerUnit * static_cast<double>(ds.n());

  Vector gamma = Vector::Zero(Xk.cols());
  double ll = logistic_log_likelihood(Xk, ds.Z, gamma);
  Vector score = logistic_score(Xk, ds.Z, gamma);

  PropensityModel pm;
  pm.dropped_columns = normalized(drop);
  int it = 0;
  for (; it < kMaxNewtonIterations && score.norm() > tol; ++it) {
    const Vector eta = Xk * gamma;
    Vector w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double p = inverse_logit(eta[i]);
      w[i] = p * (1.0 - p);
    }
    Matrix info = Xk.transpose() * w.asDiagonal() * Xk;
    symmetrize(info);
    const Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::Separation, "observed information is not positive definite");
    }
    const Vector step = ldlt.solve(score);
    if (!step.allFinite()) throw Error(ErrorCode::Separation, "Newton step is not finite");

    // Likelihood changes near the optimum fall below rounding error.
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    double scale = 1.0;
    Vector candidate = gamma + step;
    double ll_new = logistic_log_likelihood(Xk, ds.Z, candidate);
    int halvings = 0;
    while (!(ll_new >= ll - slack) && halvings < kMaxHalvings) {
      scale *= 0.5;
      candidate = gamma + scale * step;
      ll_new = logistic_log_likelihood(Xk, ds.Z, candidate);
      ++halvings;
    }
    if (!(ll_new >= ll - slack)) break;  // no ascent direction left at machine precision
    gamma = candidate;
    ll = ll_new;
    score = logistic_score(Xk, ds.Z, gamma);
    if (gamma.norm() > kSeparationNorm) {
      throw Error(ErrorCode::Separation, "coefficient norm exceeds 1e4");
    }
  }

  pm.iterations = it;
  pm.score_norm = score.norm();
  pm.converged = pm.score_norm <= tol;
  if (!pm.converged) {
    throw Error(ErrorCode::Separation, "no convergence after " + std::to_string(it) +
                                           " iterations (score norm " +
                                           std::to_string(pm.score_norm) + ")");
  }
  const Vector eta = Xk * gamma;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = inverse_logit(eta[i]);
    if (p < kDegenerateProbability || p > 1.0 - kDegenerateProbability) {
      throw Error(ErrorCode::Separation, "fitted probability of unit " + std::to_string(i + 1) +
                                             " is numerically 0 or 1");
    }
  }
  pm.gamma_hat = Vector::Zero(ds.p());
  for (std::size_t k = 0; k < kept.size(); ++k) pm.gamma_hat[kept[k]] = gamma[static_cast<Eigen::Index>(k)];
  return pm;
}

Vector propensities(const PropensityModel& model, const Matrix& X) {
  if (X.cols() != model.gamma_hat.size()) {
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(X.cols()) +
                                                  " columns, model expects " +
                                                  std::to_string(model.gamma_hat.size()));
  }
  const Vector eta = X * model.gamma_hat;
  Vector tau(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    tau[i] = std::clamp(inverse_logit(eta[i]), kPropensityClip, 1.0 - kPropensityClip);
  }
  return tau;
}

}  // namespace fnmiss

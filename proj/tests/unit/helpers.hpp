#pragma once

#include <fnmiss/model.hpp>
#include <fnmiss/simulation.hpp>

#include <doctest.h>

#include <algorithm>
#include <initializer_list>
#include <random>

namespace fnmiss::testing {

inline Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix M(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) M(i, j++) = v;
    ++i;
  }
  return M;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Eigen::VectorXi ivec(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int x : v) out[i++] = x;
  return out;
}

inline Dataset make_dataset(Matrix X, Eigen::VectorXi Z, Matrix Y) {
  const auto T = Y.cols();
  return validate_dataset(Dataset{std::move(X), std::move(Z), std::move(Y), Grid::equidistant(T)});
}

// Random design with intercept, Gaussian covariates and logistic missingness.
inline Dataset random_dataset(Eigen::Index n, Eigen::Index p, Eigen::Index T, std::uint64_t seed,
                              double missing_shift = 0.5) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k) X(i, k) = normal(rng);
  }
  Matrix B(p, T);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index j = 0; j < T; ++j) B(k, j) = normal(rng);
  }
  Matrix Y = X * B;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < T; ++j) Y(i, j) += normal(rng);
  }
  Eigen::VectorXi Z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = missing_shift + (p > 1 ? 0.7 * X(i, 1) : 0.0);
    std::bernoulli_distribution draw(inverse_logit(eta));
    Z[i] = draw(rng) ? 1 : 0;
  }
  return make_dataset(std::move(X), std::move(Z), std::move(Y));
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected fnmiss::Error");
  return ErrorCode::Schema;
}

}  // namespace fnmiss::testing

#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string_view>

#include "fnmiss/error.hpp"

namespace fnmiss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Marker stored in outcome rows whose curve is not observed.
inline constexpr double kNotAvailable = std::numeric_limits<double>::quiet_NaN();

// Evaluation points shared by every curve, strictly increasing inside [0,1].
class Grid {
 public:
  Grid() = default;
  explicit Grid(Vector points);

  // t_j = j/(T-1); T = 1 gives the single point 0.
  static Grid equidistant(Eigen::Index size);

  [[nodiscard]] Eigen::Index size() const noexcept { return points_.size(); }
  [[nodiscard]] const Vector& points() const noexcept { return points_; }
  [[nodiscard]] double operator[](Eigen::Index j) const { return points_[j]; }

 private:
  Vector points_;
};

struct Dataset {
  Matrix X;         // n x p
  Eigen::VectorXi Z;  // n, entries in {0,1}
  Matrix Y;         // n x T, rows with Z = 0 hold kNotAvailable
  Grid grid;

  [[nodiscard]] Eigen::Index n() const noexcept { return X.rows(); }
  [[nodiscard]] Eigen::Index p() const noexcept { return X.cols(); }
  [[nodiscard]] Eigen::Index T() const noexcept { return grid.size(); }
  [[nodiscard]] Eigen::Index n_observed() const { return Z.sum(); }
};

struct CovariateMoments {
  Vector mu_x;     // p
  Matrix Sigma_x;  // p x p, divisor n
  Matrix Pi;       // p x p, n^-1 sum Z_i x_i x_i^T
};

enum class Method { OR, DR, CC };

std::string_view to_string(Method m) noexcept;

struct MeanEstimate {
  Method method = Method::OR;
  Vector mu_hat;  // T
  Matrix C_hat;   // T x T, covariance of sqrt(n) (mu_hat - mu)
  Eigen::Index n = 0;
  Grid grid;
};

// Certifies the Dataset invariants and overwrites unobserved outcome rows with
// kNotAvailable. Throws Error on the first violation found.
Dataset validate_dataset(Dataset raw);

CovariateMoments covariate_moments(const Dataset& ds);

// Averages A with its transpose in place.
void symmetrize(Matrix& A);

}  // namespace fnmiss

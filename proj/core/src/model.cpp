#include "fnmiss/model.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace fnmiss {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::NonBinaryIndicator: return "NonBinaryIndicator";
    case ErrorCode::NonFiniteObservedOutcome: return "NonFiniteObservedOutcome";
    case ErrorCode::NonFiniteCovariate: return "NonFiniteCovariate";
    case ErrorCode::TooFewObserved: return "TooFewObserved";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::InsufficientObserved: return "InsufficientObserved";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::AllSameIndicator: return "AllSameIndicator";
    case ErrorCode::SingularPi: return "SingularPi";
    case ErrorCode::ZeroVarianceDiagonal: return "ZeroVarianceDiagonal";
    case ErrorCode::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::NonPSD: return "NonPSD";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::FailureRateExceeded: return "FailureRateExceeded";
    case ErrorCode::Schema: return "Schema";
  }
  return "Unknown";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::OR: return "OR";
    case Method::DR: return "DR";
    case Method::CC: return "CC";
  }
  return "?";
}

Grid::Grid(Vector points) : points_(std::move(points)) {
  if (points_.size() == 0) throw Error(ErrorCode::InvalidGrid, "grid has no points");
  for (Eigen::Index j = 0; j < points_.size(); ++j) {
    const double t = points_[j];
    if (!std::isfinite(t) || t < 0.0 || t > 1.0) {
      throw Error(ErrorCode::InvalidGrid, "grid point " + std::to_string(j) + " outside [0,1]");
    }
    if (j > 0 && !(t > points_[j - 1])) {
      throw Error(ErrorCode::InvalidGrid, "grid not strictly increasing at index " + std::to_string(j));
    }
  }
}

Grid Grid::equidistant(Eigen::Index size) {
  if (size < 1) throw Error(ErrorCode::InvalidGrid, "grid size must be positive");
  Vector pts(size);
  for (Eigen::Index j = 0; j < size; ++j) {
    pts[j] = size == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(size - 1);
  }
  return Grid(std::move(pts));
}

void symmetrize(Matrix& A) {
  Matrix S = 0.5 * (A + A.transpose());
  A = std::move(S);
}

Dataset validate_dataset(Dataset raw) {
  const auto n = raw.X.rows();
  if (raw.Z.size() != n || raw.Y.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "row counts differ: X=" + std::to_string(n) + " Z=" + std::to_string(raw.Z.size()) +
                    " Y=" + std::to_string(raw.Y.rows()));
  }
  if (raw.Y.cols() != raw.grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Y has " + std::to_string(raw.Y.cols()) +
                                                  " columns but the grid has " +
                                                  std::to_string(raw.grid.size()) + " points");
  }
  if (!raw.X.allFinite()) throw Error(ErrorCode::NonFiniteCovariate, "X contains non-finite entries");

  Eigen::Index observed = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int z = raw.Z[i];
    if (z != 0 && z != 1) {
      throw Error(ErrorCode::NonBinaryIndicator,
                  "unit " + std::to_string(i) + " has z=" + std::to_string(z));
    }
    if (z == 1) {
      if (!raw.Y.row(i).allFinite()) {
        throw Error(ErrorCode::NonFiniteObservedOutcome,
                    "observed unit " + std::to_string(i) + " has a non-finite outcome");
      }
      ++observed;
    } else {
      raw.Y.row(i).setConstant(kNotAvailable);
    }
  }
  if (observed < raw.X.cols()) {
    throw Error(ErrorCode::TooFewObserved, std::to_string(observed) + " observed units for p=" +
                                               std::to_string(raw.X.cols()));
  }
  return raw;
}

CovariateMoments covariate_moments(const Dataset& ds) {
  const auto n = static_cast<double>(ds.n());
  CovariateMoments cm;
  cm.mu_x = ds.X.colwise().mean().transpose();
  const Matrix centered = ds.X.rowwise() - cm.mu_x.transpose();
  cm.Sigma_x = centered.transpose() * centered / n;
  const Vector z = ds.Z.cast<double>();
  cm.Pi = ds.X.transpose() * z.asDiagonal() * ds.X / n;
  symmetrize(cm.Sigma_x);
  symmetrize(cm.Pi);
  return cm;
}

}  // namespace fnmiss

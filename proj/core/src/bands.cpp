#include "fnmiss/bands.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fnmiss {
namespace {

constexpr double kBracketHigh = 20.0;
constexpr double kBisectionTolerance = 1e-12;
constexpr double kPartitionSlack = 1e-12;

void check_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::LevelOutOfRange, "alpha must lie in (0,1), got " + std::to_string(alpha));
  }
}

// Smallest u in [0, 20] with kac_rice_bound(u) <= target.
double solve_level(double kappa, bool include_entry, double target) {
  double lo = 0.0;
  double hi = kBracketHigh;
  if (kac_rice_bound(lo, kappa, include_entry) <= target) return lo;
  while (hi - lo > kBisectionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (kac_rice_bound(mid, kappa, include_entry) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Partition checked_partition(const Partition& partition) {
  if (partition.empty()) return {Interval{0.0, 1.0}};
  if (std::abs(partition.front().lo) > kPartitionSlack ||
      std::abs(partition.back().hi - 1.0) > kPartitionSlack) {
    throw Error(ErrorCode::BadPartition, "partition must start at 0 and end at 1");
  }
  for (std::size_t k = 0; k < partition.size(); ++k) {
    if (!(partition[k].hi > partition[k].lo)) {
      throw Error(ErrorCode::BadPartition, "interval " + std::to_string(k) + " is empty or reversed");
    }
    if (k > 0 && std::abs(partition[k].lo - partition[k - 1].hi) > kPartitionSlack) {
      throw Error(ErrorCode::BadPartition,
                  "intervals " + std::to_string(k - 1) + " and " + std::to_string(k) +
                      " leave a gap or overlap");
    }
  }
  return partition;
}

Vector standard_errors(const MeanEstimate& est) {
  if (est.n < 1) throw Error(ErrorCode::DimensionMismatch, "estimate has no sample size");
  Vector se(est.C_hat.rows());
  for (Eigen::Index j = 0; j < se.size(); ++j) {
    const double v = est.C_hat(j, j);
    if (!(v > 0.0)) {
      throw Error(ErrorCode::ZeroVarianceDiagonal, "C(" + std::to_string(j) + "," +
                                                       std::to_string(j) + ") is not positive");
    }
    se[j] = std::sqrt(v / static_cast<double>(est.n));
  }
  return se;
}

Band assemble(BandKind kind, const MeanEstimate& est, double alpha, Vector u, Vector se) {
  Band b;
  b.kind = kind;
  b.alpha = alpha;
  b.center = est.mu_hat;
  b.u = std::move(u);
  b.se = std::move(se);
  b.lower = b.center - b.u.cwiseProduct(b.se);
  b.upper = b.center + b.u.cwiseProduct(b.se);
  b.n = est.n;
  b.grid = est.grid;
  return b;
}

}  // namespace

double normal_upper_tail(double u) noexcept { return 0.5 * std::erfc(u / std::numbers::sqrt2); }

double kac_rice_bound(double u, double kappa, bool include_entry) noexcept {
  const double entry = include_entry ? normal_upper_tail(u) : 0.0;
  return 2.0 * (entry + kappa / (2.0 * std::numbers::pi) * std::exp(-0.5 * u * u));
}

RoughnessProfile roughness(const Matrix& C, const Grid& grid) {
  const auto T = grid.size();
  if (C.rows() != T || C.cols() != T) {
    throw Error(ErrorCode::DimensionMismatch, "covariance is " + std::to_string(C.rows()) + "x" +
                                                  std::to_string(C.cols()) + " for T=" +
                                                  std::to_string(T));
  }
  for (Eigen::Index j = 0; j < T; ++j) {
    if (!(C(j, j) > 0.0)) {
      throw Error(ErrorCode::ZeroVarianceDiagonal, "C(" + std::to_string(j) + "," +
                                                       std::to_string(j) + ") is not positive");
    }
  }
  RoughnessProfile rp;
  rp.grid = grid;
  rp.tau = Vector::Zero(std::max<Eigen::Index>(T - 1, 0));
  rp.kappa = 0.0;
  for (Eigen::Index j = 0; j + 1 < T; ++j) {
    const double rho = C(j, j + 1) / std::sqrt(C(j, j) * C(j + 1, j + 1));
    const double delta = grid[j + 1] - grid[j];
    rp.tau[j] = std::sqrt(std::max(0.0, 2.0 * (1.0 - rho))) / delta;
    rp.kappa += rp.tau[j] * delta;
  }
  return rp;
}

double critical_constant(double kappa, double alpha) {
  check_level(alpha);
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::InvalidConfig, "kappa must be finite and non-negative");
  }
  return solve_level(kappa, true, alpha);
}

Vector critical_fair(const RoughnessProfile& profile, double alpha, const Partition& partition) {
  check_level(alpha);
  const Partition parts = checked_partition(partition);
  const auto& t = profile.grid.points();
  const auto T = t.size();
  const double pointwise = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);

  Vector u(T);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto [lo, hi] = parts[k];
    double kappa_k = 0.0;
    for (Eigen::Index j = 0; j + 1 < T; ++j) {
      const double overlap = std::min(hi, t[j + 1]) - std::max(lo, t[j]);
      if (overlap > 0.0) kappa_k += profile.tau[j] * overlap;
    }
    const bool first = k == 0;
    double u_k = solve_level(kappa_k, first, alpha * (hi - lo));
    u_k = std::max(u_k, pointwise);

    const bool last = k + 1 == parts.size();
    for (Eigen::Index j = 0; j < T; ++j) {
      if (t[j] >= lo && (t[j] < hi || (last && t[j] <= hi))) u[j] = u_k;
    }
  }
  return u;
}

Partition equal_partition(int count) {
  if (count < 1) throw Error(ErrorCode::BadPartition, "partition needs at least one interval");
  Partition p;
  for (int k = 0; k < count; ++k) {
    p.push_back({static_cast<double>(k) / count, k + 1 == count ? 1.0 : static_cast<double>(k + 1) / count});
  }
  return p;
}

Band build_scb(const MeanEstimate& est, double alpha, const Partition& partition) {
  Vector se = standard_errors(est);
  const RoughnessProfile rp = roughness(est.C_hat, est.grid);
  return assemble(BandKind::SCB, est, alpha, critical_fair(rp, alpha, partition), std::move(se));
}

Band build_pcb(const MeanEstimate& est, double alpha) {
  check_level(alpha);
  if (est.n < 2) throw Error(ErrorCode::InsufficientObserved, "pointwise band needs n >= 2");
  Vector se = standard_errors(est);
  const boost::math::students_t dist(static_cast<double>(est.n - 1));
  const double q = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
  Vector u = Vector::Constant(se.size(), q);
  return assemble(BandKind::PCB, est, alpha, std::move(u), std::move(se));
}

bool covers(const Band& band, const Vector& truth) {
  if (truth.size() != band.center.size()) {
    throw Error(ErrorCode::DimensionMismatch, "truth has " + std::to_string(truth.size()) +
                                                  " points, band has " +
                                                  std::to_string(band.center.size()));
  }
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    if (!(band.lower[j] <= truth[j] && truth[j] <= band.upper[j])) return false;
  }
  return true;
}

}  // namespace fnmiss

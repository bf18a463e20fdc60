#pragma once

#include <vector>

#include "fnmiss/model.hpp"

namespace fnmiss {

// Local roughness of the standardized process on grid segments.
struct RoughnessProfile {
  Vector tau;    // T-1, one value per segment [t_j, t_{j+1}]
  double kappa;  // sum_j tau_j * (t_{j+1} - t_j)
  Grid grid;
};

struct Interval {
  double lo;
  double hi;
};

// Intervals covering [0,1] in order. Empty means the whole domain.
using Partition = std::vector<Interval>;

enum class BandKind { SCB, PCB };

struct Band {
  BandKind kind = BandKind::SCB;
  double alpha = 0.05;
  Vector center;
  Vector u;
  Vector se;  // sqrt(C_jj / n)
  Vector lower;
  Vector upper;
  Eigen::Index n = 0;
  Grid grid;
};

RoughnessProfile roughness(const Matrix& C, const Grid& grid);

double normal_upper_tail(double u) noexcept;

// Two-sided Kac-Rice bound on P(sup |X| > u) for a unit-variance process whose
// roughness integrates to kappa. The P(|X(t_0)| > u) entry term is optional so
// the same expression serves every interval of a partition.
double kac_rice_bound(double u, double kappa, bool include_entry) noexcept;

// Solves kac_rice_bound(u, kappa, true) = alpha by bisection on [0, 20].
double critical_constant(double kappa, double alpha);

// Piecewise-constant critical values: interval k of length l_k receives the
// share alpha * l_k of the error budget, and the first interval also pays the
// entry probability. Never below the pointwise normal quantile.
Vector critical_fair(const RoughnessProfile& profile, double alpha, const Partition& partition = {});

// Splits [0,1] into `count` equal intervals.
Partition equal_partition(int count);

Band build_scb(const MeanEstimate& est, double alpha, const Partition& partition = {});

// Pointwise band with the t quantile on n - 1 degrees of freedom.
Band build_pcb(const MeanEstimate& est, double alpha);

bool covers(const Band& band, const Vector& truth);

}  // namespace fnmiss

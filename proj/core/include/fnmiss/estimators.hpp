#pragma once

#include "fnmiss/nuisance.hpp"

namespace fnmiss {

struct DRWeights {
  Vector w;                   // Z_i / tau_i
  double mean_inv_tau = 0.0;  // n^-1 sum_i 1/tau_i over all units
};

// Regression imputation: averages B_hat^T x_i over all n units.
MeanEstimate estimate_or(const Dataset& ds, const OutcomeModel& om);

// B^T Sigma_x B + (mu_x^T Pi^-1 mu_x) Sigma_eps.
Matrix cov_or(const OutcomeModel& om, const CovariateMoments& cm);

DRWeights dr_weights(const Dataset& ds, const PropensityModel& pm);
// Weights from externally supplied propensities (e.g. tau = 1 when nothing is missing).
DRWeights dr_weights(const Dataset& ds, const Vector& tau);

// Augmented inverse-probability weighting. Outcome rows with Z_i = 0 are never read.
MeanEstimate estimate_dr(const Dataset& ds, const OutcomeModel& om, const PropensityModel& pm);
MeanEstimate estimate_dr(const Dataset& ds, const OutcomeModel& om, const DRWeights& weights);

// Both-models-correct plug-in B^T Sigma_x B + E[1/tau] Sigma_eps, used in every scenario.
Matrix cov_dr(const Dataset& ds, const OutcomeModel& om, const PropensityModel& pm,
              const CovariateMoments& cm);
Matrix cov_dr(const OutcomeModel& om, const DRWeights& weights, const CovariateMoments& cm);

// Complete-case mean; C_hat = (n/n_obs) * sample covariance of the observed curves.
MeanEstimate estimate_cc(const Dataset& ds);

}  // namespace fnmiss

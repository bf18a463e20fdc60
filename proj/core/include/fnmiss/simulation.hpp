#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fnmiss/bands.hpp"
#include "fnmiss/nuisance.hpp"

namespace fnmiss {

using Rng = std::mt19937_64;

// Independent stream seed for `stream` under `master` (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

struct MaternParams {
  double kappa_smooth = 1.5;
  double phi = 0.1;
  double variance = 1.0;
};

// Matern correlation at distance d evaluated through the modified Bessel function.
double matern_bessel(double d, const MaternParams& params);

// T x T Matern covariance on the grid; closed form (1 + d/phi) e^{-d/phi} when kappa = 3/2.
Matrix matern_cov(const Grid& grid, const MaternParams& params = {});

// Rows are draws from N(0, cov) using a symmetric square root of cov.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& cov);
  [[nodiscard]] Matrix sample(Eigen::Index count, Rng& rng) const;
  [[nodiscard]] const Matrix& root() const noexcept { return root_; }

 private:
  Matrix root_;
};

Matrix sample_gaussian(const Matrix& cov, Eigen::Index count, Rng& rng);

struct MVTParams {
  double nu = 4.0;
  Vector lambda_diag;  // linearly spaced 1..3
  Matrix Q;            // orthonormal
  Matrix Delta;        // Q diag(lambda) Q^T
  Matrix Delta_root;   // Q diag(sqrt lambda) Q^T
};

MVTParams make_mvt_params(Eigen::Index T, Rng& rng, double nu = 4.0);
MVTParams make_mvt_params(const Matrix& Q, double nu = 4.0);

// Rows are Delta^{1/2} z * sqrt(nu / w), z ~ N(0, I), w ~ chi^2_nu.
Matrix sample_mvt(const MVTParams& params, Eigen::Index count, Rng& rng);

// Haar-distributed orthonormal matrix from the QR factor of a Gaussian matrix.
Matrix random_orthonormal(Eigen::Index T, Rng& rng);

inline constexpr Eigen::Index kSimCovariates = 6;

// Columns: 1, (x2, x3, x4) ~ MVN, x5 ~ Ber(0.2), x6 ~ Bin(3, 0.6).
Matrix gen_covariates(Eigen::Index n, Rng& rng);

Vector covariate_means();
Vector true_gamma();
Matrix true_beta(const Grid& grid);  // 6 x T
Vector true_mu(const Grid& grid);    // E[x]^T beta(t)

enum class ErrorKind { MaternGaussian, MultivariateT };
enum class Misspec { None, Outcome, Missingness, Both };

std::string_view to_string(ErrorKind k) noexcept;
std::string_view to_string(Misspec m) noexcept;
std::optional<ErrorKind> parse_error_kind(std::string_view s) noexcept;
std::optional<Misspec> parse_misspec(std::string_view s) noexcept;

// 0-based indices of x3 and x5, the covariates omitted under misspecification.
ColumnSet misspecified_columns();
ColumnSet outcome_drop(Misspec m);
ColumnSet propensity_drop(Misspec m);

struct SimConfig {
  Eigen::Index n = 1000;
  Eigen::Index T = 50;
  int reps = 1000;
  ErrorKind error_kind = ErrorKind::MaternGaussian;
  Misspec misspec = Misspec::None;
  double alpha = 0.05;
  std::uint64_t seed = 20240101;
  Partition partition;  // empty: whole domain
  MaternParams matern;
  // Flip the sign of the missingness linear predictor so that about 69% of
  // curves are observed instead of about 31%.
  bool calibrate_missingness = false;
  // Draw Q once per study (true) or once per replicate (false).
  bool fixed_q = true;

  void validate() const;
};

// Quantities shared by every replicate of a study.
struct StudyContext {
  Grid grid;
  Matrix beta;   // 6 x T
  Vector truth;  // mu_y
  std::optional<GaussianSampler> gaussian;
  std::optional<MVTParams> mvt;

  static StudyContext make(const SimConfig& cfg);
};

struct SimulatedData {
  Dataset dataset;  // masked
  Matrix Y_full;    // every curve, including the unobserved ones
};

SimulatedData gen_dataset(const SimConfig& cfg, const StudyContext& ctx, Rng& rng);

inline constexpr std::size_t kEstimatorCount = 3;
inline constexpr std::array<Method, kEstimatorCount> kEstimators{Method::OR, Method::DR, Method::CC};

struct ReplicateRecord {
  bool failed = false;
  std::string failure;
  std::array<MeanEstimate, kEstimatorCount> estimates;
  std::array<Band, kEstimatorCount> scb;
  std::array<Band, kEstimatorCount> pcb;
  std::array<bool, kEstimatorCount> scb_covers{};
  std::array<bool, kEstimatorCount> pcb_covers{};
  std::array<Vector, kEstimatorCount> error;  // mu_hat - mu_y
  double observed_fraction = 0.0;
};

ReplicateRecord run_replication(const SimConfig& cfg, const StudyContext& ctx, std::uint64_t rep_seed);

// Seed of replicate `index` under the config's master seed.
std::uint64_t replicate_seed(const SimConfig& cfg, int index) noexcept;

struct EstimatorSummary {
  double scb_coverage = 0.0;  // percent
  double pcb_coverage = 0.0;  // percent
  Vector bias;
  Vector est_variance;  // mean of C_jj / n
  Vector mc_variance;   // across-replicate variance of mu_hat_j
  Vector mse;           // bias^2 + mc_variance
};

struct StudyResult {
  SimConfig config;
  int replicates = 0;
  int failed = 0;
  std::vector<std::string> failures;
  double mean_observed_fraction = 0.0;
  Grid grid;
  Vector truth;
  std::array<EstimatorSummary, kEstimatorCount> summary;

  [[nodiscard]] const EstimatorSummary& of(Method m) const;
};

inline constexpr double kMaxFailureRate = 0.01;

// Runs cfg.reps replicates on `threads` workers (0: hardware concurrency) and
// aggregates them in replicate order. Throws FailureRateExceeded when more
// than 1% of replicates fail.
StudyResult run_study(const SimConfig& cfg, int threads = 1);

// Lower-level access for harnesses that need the raw replicate records.
std::vector<ReplicateRecord> run_replicates(const SimConfig& cfg, const StudyContext& ctx,
                                            int threads);

}  // namespace fnmiss

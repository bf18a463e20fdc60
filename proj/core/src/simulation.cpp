#include "fnmiss/simulation.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

#include "fnmiss/estimators.hpp"

namespace fnmiss {
namespace {

constexpr double kPsdTolerance = 1e-8;
constexpr std::uint64_t kQStream = 0xFFFF'FFFF'FFFF'FFFFull;
constexpr int kChunk = 64;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix M(rows, cols);
  // Row-major fill so draws are consumed unit by unit.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = normal(rng);
  }
  return M;
}

const Matrix& covariate_block_cov() {
  static const Matrix sigma = [] {
    Matrix s(3, 3);
    s << 1.0, 0.2, 0.3,
         0.2, 2.0, 0.6,
         0.3, 0.6, 0.4;
    return s;
  }();
  return sigma;
}

const Matrix& covariate_block_chol() {
  static const Matrix L = [] {
    const Eigen::LLT<Matrix> llt(covariate_block_cov());
    if (llt.info() != Eigen::Success) {
      throw std::logic_error("covariate covariance of x2..x4 is not positive definite");
    }
    return Matrix(llt.matrixL());
  }();
  return L;
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Invokes sink(index, record) for every replicate in increasing index order
// while computing up to `threads` replicates concurrently.
void for_each_replicate(const SimConfig& cfg, const StudyContext& ctx, int threads,
                        const std::function<void(int, ReplicateRecord&&)>& sink) {
  const int workers = std::max(1, std::min(resolve_threads(threads), kChunk));
  std::vector<ReplicateRecord> chunk;
  for (int start = 0; start < cfg.reps; start += kChunk) {
    const int count = std::min(kChunk, cfg.reps - start);
    chunk.assign(static_cast<std::size_t>(count), ReplicateRecord{});
    if (workers == 1) {
      for (int k = 0; k < count; ++k) {
        chunk[static_cast<std::size_t>(k)] = run_replication(cfg, ctx, replicate_seed(cfg, start + k));
      }
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (int k = next++; k < count; k = next++) {
            chunk[static_cast<std::size_t>(k)] =
                run_replication(cfg, ctx, replicate_seed(cfg, start + k));
          }
        });
      }
      for (auto& t : pool) t.join();
    }
    for (int k = 0; k < count; ++k) sink(start + k, std::move(chunk[static_cast<std::size_t>(k)]));
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(master ^ splitmix64(stream));
}

std::uint64_t replicate_seed(const SimConfig& cfg, int index) noexcept {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
}

double matern_bessel(double d, const MaternParams& params) {
  if (d == 0.0) return params.variance;
  const double r = std::abs(d) / params.phi;
  const double k = params.kappa_smooth;
  return params.variance / (std::pow(2.0, k - 1.0) * boost::math::tgamma(k)) * std::pow(r, k) *
         boost::math::cyl_bessel_k(k, r);
}

Matrix matern_cov(const Grid& grid, const MaternParams& params) {
  if (!(params.kappa_smooth > 0.0) || !(params.phi > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "Matern parameters must be positive");
  }
  const auto T = grid.size();
  const bool closed_form = params.kappa_smooth == 1.5;
  Matrix C(T, T);
  for (Eigen::Index j = 0; j < T; ++j) {
    for (Eigen::Index k = 0; k <= j; ++k) {
      const double d = std::abs(grid[j] - grid[k]);
      double v;
      if (closed_form) {
        const double r = d / params.phi;
        v = params.variance * (1.0 + r) * std::exp(-r);
      } else {
        v = matern_bessel(d, params);
      }
      C(j, k) = v;
      C(k, j) = v;
    }
  }
  return C;
}

GaussianSampler::GaussianSampler(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::DimensionMismatch, "covariance is not square");
  Matrix sym = cov;
  symmetrize(sym);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.size() > 0 && ev.minCoeff() < -kPsdTolerance * scale) {
    throw Error(ErrorCode::NonPSD, "smallest eigenvalue " + std::to_string(ev.minCoeff()));
  }
  const Vector sqrt_ev = ev.cwiseMax(0.0).cwiseSqrt();
  root_ = eig.eigenvectors() * sqrt_ev.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix GaussianSampler::sample(Eigen::Index count, Rng& rng) const {
  return standard_normal_matrix(count, root_.rows(), rng) * root_;
}

Matrix sample_gaussian(const Matrix& cov, Eigen::Index count, Rng& rng) {
  return GaussianSampler(cov).sample(count, rng);
}

Matrix random_orthonormal(Eigen::Index T, Rng& rng) {
  const Matrix G = standard_normal_matrix(T, T, rng);
  const Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(T, T);
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < T; ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

MVTParams make_mvt_params(const Matrix& Q, double nu) {
  if (!(nu > 2.0)) throw Error(ErrorCode::InvalidConfig, "multivariate t needs nu > 2");
  const auto T = Q.rows();
  MVTParams p;
  p.nu = nu;
  p.lambda_diag = T == 1 ? Vector(Vector::Constant(1, 1.0)) : Vector(Vector::LinSpaced(T, 1.0, 3.0));
  p.Q = Q;
  p.Delta = Q * p.lambda_diag.asDiagonal() * Q.transpose();
  symmetrize(p.Delta);
  p.Delta_root = Q * p.lambda_diag.cwiseSqrt().asDiagonal() * Q.transpose();
  return p;
}

MVTParams make_mvt_params(Eigen::Index T, Rng& rng, double nu) {
  return make_mvt_params(random_orthonormal(T, rng), nu);
}

Matrix sample_mvt(const MVTParams& params, Eigen::Index count, Rng& rng) {
  const auto T = params.Delta_root.rows();
  std::normal_distribution<double> normal;
  std::chi_squared_distribution<double> chi2(params.nu);
  Matrix out(count, T);
  Vector z(T);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < T; ++j) z[j] = normal(rng);
    const double w = chi2(rng);
    out.row(i) = (params.Delta_root * z).transpose() * std::sqrt(params.nu / w);
  }
  return out;
}

Matrix gen_covariates(Eigen::Index n, Rng& rng) {
  const Matrix& L = covariate_block_chol();
  const Eigen::Vector3d mean(-2.0, 4.0, 0.0);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution ber(0.2);
  std::binomial_distribution<int> bin(3, 0.6);
  Matrix X(n, kSimCovariates);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d z;
    for (int k = 0; k < 3; ++k) z[k] = normal(rng);
    const Eigen::Vector3d x = mean + L * z;
    X(i, 0) = 1.0;
    X(i, 1) = x[0];
    X(i, 2) = x[1];
    X(i, 3) = x[2];
    X(i, 4) = ber(rng) ? 1.0 : 0.0;
    X(i, 5) = static_cast<double>(bin(rng));
  }
  return X;
}

Vector covariate_means() {
  Vector m(kSimCovariates);
  m << 1.0, -2.0, 4.0, 0.0, 0.2, 1.8;
  return m;
}

Vector true_gamma() {
  Vector g(kSimCovariates);
  g << 0.3, -0.3, -0.3, -0.3, -0.3, -0.3;
  return g;
}

Matrix true_beta(const Grid& grid) {
  Matrix B(kSimCovariates, grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const double t = grid[j];
    B(0, j) = 40.0 - t;
    B(1, j) = 2.0 * std::sin(4.0 * t);
    B(2, j) = 3.0 - std::cos(5.0 * t);
    B(3, j) = 1.5 * std::log(5.0 * t + 0.1);
    B(4, j) = 0.5 * std::sin(2.0 * t);
    B(5, j) = 2.0 - 1.5 * t + 1.3 * t * t;
  }
  return B;
}

Vector true_mu(const Grid& grid) { return true_beta(grid).transpose() * covariate_means(); }

std::string_view to_string(ErrorKind k) noexcept {
  return k == ErrorKind::MaternGaussian ? "gaussian" : "t";
}

std::string_view to_string(Misspec m) noexcept {
  switch (m) {
    case Misspec::None: return "none";
    case Misspec::Outcome: return "outcome";
    case Misspec::Missingness: return "missingness";
    case Misspec::Both: return "both";
  }
  return "?";
}

std::optional<ErrorKind> parse_error_kind(std::string_view s) noexcept {
  if (s == "gaussian") return ErrorKind::MaternGaussian;
  if (s == "t") return ErrorKind::MultivariateT;
  return std::nullopt;
}

std::optional<Misspec> parse_misspec(std::string_view s) noexcept {
  for (auto m : {Misspec::None, Misspec::Outcome, Misspec::Missingness, Misspec::Both}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

ColumnSet misspecified_columns() { return {2, 4}; }

ColumnSet outcome_drop(Misspec m) {
  return (m == Misspec::Outcome || m == Misspec::Both) ? misspecified_columns() : ColumnSet{};
}

ColumnSet propensity_drop(Misspec m) {
  return (m == Misspec::Missingness || m == Misspec::Both) ? misspecified_columns() : ColumnSet{};
}

void SimConfig::validate() const {
  if (n < kSimCovariates + 2) {
    throw Error(ErrorCode::InvalidConfig, "n must be at least p + 2 = 8");
  }
  if (T < 2) throw Error(ErrorCode::InvalidConfig, "T must be at least 2");
  if (reps < 1) throw Error(ErrorCode::InvalidConfig, "reps must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::LevelOutOfRange, "alpha outside (0,1)");
}

StudyContext StudyContext::make(const SimConfig& cfg) {
  cfg.validate();
  StudyContext ctx;
  ctx.grid = Grid::equidistant(cfg.T);
  ctx.beta = true_beta(ctx.grid);
  ctx.truth = true_mu(ctx.grid);
  if (cfg.error_kind == ErrorKind::MaternGaussian) {
    ctx.gaussian.emplace(matern_cov(ctx.grid, cfg.matern));
  } else if (cfg.fixed_q) {
    Rng rng(derive_seed(cfg.seed, kQStream));
    ctx.mvt = make_mvt_params(cfg.T, rng);
  }
  return ctx;
}

SimulatedData gen_dataset(const SimConfig& cfg, const StudyContext& ctx, Rng& rng) {
  Matrix X = gen_covariates(cfg.n, rng);

  Matrix E;
  if (cfg.error_kind == ErrorKind::MaternGaussian) {
    E = ctx.gaussian ? ctx.gaussian->sample(cfg.n, rng)
                     : sample_gaussian(matern_cov(ctx.grid, cfg.matern), cfg.n, rng);
  } else if (ctx.mvt) {
    E = sample_mvt(*ctx.mvt, cfg.n, rng);
  } else {
    const MVTParams params = make_mvt_params(cfg.T, rng);
    E = sample_mvt(params, cfg.n, rng);
  }

  SimulatedData out;
  out.Y_full = X * ctx.beta + E;

  const double sign = cfg.calibrate_missingness ? -1.0 : 1.0;
  const Vector eta = sign * (X * true_gamma());
  Eigen::VectorXi Z(cfg.n);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    std::bernoulli_distribution draw(inverse_logit(eta[i]));
    Z[i] = draw(rng) ? 1 : 0;
  }

  Dataset raw{std::move(X), std::move(Z), out.Y_full, ctx.grid};
  out.dataset = validate_dataset(std::move(raw));
  return out;
}

ReplicateRecord run_replication(const SimConfig& cfg, const StudyContext& ctx,
                                std::uint64_t rep_seed) {
  ReplicateRecord rec;
  try {
    Rng rng(rep_seed);
    const SimulatedData sim = gen_dataset(cfg, ctx, rng);
    const Dataset& ds = sim.dataset;
    rec.observed_fraction = static_cast<double>(ds.n_observed()) / static_cast<double>(ds.n());

    const OutcomeModel om = fit_ols(ds, outcome_drop(cfg.misspec));
    const PropensityModel pm = fit_logistic(ds, propensity_drop(cfg.misspec));

    rec.estimates = {estimate_or(ds, om), estimate_dr(ds, om, pm), estimate_cc(ds)};
    for (std::size_t e = 0; e < kEstimatorCount; ++e) {
      rec.scb[e] = build_scb(rec.estimates[e], cfg.alpha, cfg.partition);
      rec.pcb[e] = build_pcb(rec.estimates[e], cfg.alpha);
      rec.scb_covers[e] = covers(rec.scb[e], ctx.truth);
      rec.pcb_covers[e] = covers(rec.pcb[e], ctx.truth);
      rec.error[e] = rec.estimates[e].mu_hat - ctx.truth;
    }
  } catch (const Error& err) {
    rec = ReplicateRecord{};
    rec.failed = true;
    rec.failure = err.what();
  }
  return rec;
}

std::vector<ReplicateRecord> run_replicates(const SimConfig& cfg, const StudyContext& ctx,
                                            int threads) {
  std::vector<ReplicateRecord> out(static_cast<std::size_t>(cfg.reps));
  for_each_replicate(cfg, ctx, threads, [&](int index, ReplicateRecord&& rec) {
    out[static_cast<std::size_t>(index)] = std::move(rec);
  });
  return out;
}

const EstimatorSummary& StudyResult::of(Method m) const {
  for (std::size_t e = 0; e < kEstimatorCount; ++e) {
    if (kEstimators[e] == m) return summary[e];
  }
  throw std::out_of_range("unknown estimator");
}

StudyResult run_study(const SimConfig& cfg, int threads) {
  const StudyContext ctx = StudyContext::make(cfg);
  const auto T = ctx.grid.size();

  struct Accumulator {
    int scb_hits = 0;
    int pcb_hits = 0;
    Vector mean = Vector::Zero(0);
    Vector m2 = Vector::Zero(0);
    Vector est_var = Vector::Zero(0);
  };
  std::array<Accumulator, kEstimatorCount> acc;
  for (auto& a : acc) {
    a.mean = Vector::Zero(T);
    a.m2 = Vector::Zero(T);
    a.est_var = Vector::Zero(T);
  }

  StudyResult result;
  result.config = cfg;
  result.grid = ctx.grid;
  result.truth = ctx.truth;
  int ok = 0;
  double observed = 0.0;

  for_each_replicate(cfg, ctx, threads, [&](int index, ReplicateRecord&& rec) {
    ++result.replicates;
    if (rec.failed) {
      ++result.failed;
      result.failures.push_back("replicate " + std::to_string(index) + ": " + rec.failure);
      return;
    }
    ++ok;
    observed += rec.observed_fraction;
    for (std::size_t e = 0; e < kEstimatorCount; ++e) {
      auto& a = acc[e];
      a.scb_hits += rec.scb_covers[e] ? 1 : 0;
      a.pcb_hits += rec.pcb_covers[e] ? 1 : 0;
      // Welford update on the error curve, in replicate order.
      const Vector delta = rec.error[e] - a.mean;
      a.mean += delta / static_cast<double>(ok);
      a.m2 += delta.cwiseProduct(rec.error[e] - a.mean);
      a.est_var += rec.estimates[e].C_hat.diagonal() / static_cast<double>(rec.estimates[e].n);
    }
  });

  if (static_cast<double>(result.failed) > kMaxFailureRate * static_cast<double>(result.replicates)) {
    throw Error(ErrorCode::FailureRateExceeded,
                std::to_string(result.failed) + " of " + std::to_string(result.replicates) +
                    " replicates failed" +
                    (result.failures.empty() ? std::string{} : "; first: " + result.failures.front()));
  }

  result.mean_observed_fraction = ok > 0 ? observed / ok : 0.0;
  for (std::size_t e = 0; e < kEstimatorCount; ++e) {
    const auto& a = acc[e];
    auto& s = result.summary[e];
    const double denom = ok > 0 ? static_cast<double>(ok) : 1.0;
    s.scb_coverage = 100.0 * a.scb_hits / denom;
    s.pcb_coverage = 100.0 * a.pcb_hits / denom;
    s.bias = a.mean;
    s.mc_variance = a.m2 / denom;
    s.est_variance = a.est_var / denom;
    s.mse = s.bias.cwiseProduct(s.bias) + s.mc_variance;
  }
  return result;
}

}  // namespace fnmiss

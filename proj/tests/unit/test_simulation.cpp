#include <fnmiss/simulation.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace fnmiss;
using namespace fnmiss::testing;

namespace {

Matrix sample_covariance(const Matrix& S) {
  const Matrix c = S.rowwise() - S.colwise().mean();
  return c.transpose() * c / static_cast<double>(S.rows() - 1);
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(p * static_cast<double>(v.size() - 1))];
}

void check_same_summary(const StudyResult& a, const StudyResult& b) {
  CHECK(a.replicates == b.replicates);
  CHECK(a.failed == b.failed);
  CHECK(a.mean_observed_fraction == b.mean_observed_fraction);
  for (std::size_t e = 0; e < kEstimatorCount; ++e) {
    CHECK(a.summary[e].scb_coverage == b.summary[e].scb_coverage);
    CHECK(a.summary[e].pcb_coverage == b.summary[e].pcb_coverage);
    CHECK(a.summary[e].bias == b.summary[e].bias);
    CHECK(a.summary[e].est_variance == b.summary[e].est_variance);
    CHECK(a.summary[e].mc_variance == b.summary[e].mc_variance);
    CHECK(a.summary[e].mse == b.summary[e].mse);
  }
}

}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("Matern closed form values") {
  const Grid g(vec({0.0, 0.05, 0.1}));
  const Matrix C = matern_cov(g);
  CHECK(C(0, 0) == 1.0);
  CHECK(C(0, 2) == doctest::Approx(0.73575888234288464).epsilon(1e-14));
  CHECK(C(0, 1) == doctest::Approx(0.90979598956895014).epsilon(1e-14));
  CHECK(C(2, 0) == C(0, 2));
}

TEST_CASE("Matern closed form agrees with the Bessel evaluation") {
  const MaternParams params;
  for (int k = 1; k <= 100; ++k) {
    const double d = 0.01 * k;
    const double r = d / params.phi;
    CHECK(std::abs(matern_bessel(d, params) - (1 + r) * std::exp(-r)) < 1e-8);
  }
  CHECK(matern_bessel(0.0, params) == 1.0);
  // Other half-integer orders have elementary forms too.
  MaternParams half{0.5, 0.2, 1.0};
  MaternParams five{2.5, 0.2, 2.0};
  for (double d : {0.01, 0.1, 0.3, 0.9}) {
    const double r = d / 0.2;
    CHECK(matern_bessel(d, half) == doctest::Approx(std::exp(-r)).epsilon(1e-10));
    CHECK(matern_bessel(d, five) == doctest::Approx(2.0 * (1 + r + r * r / 3) * std::exp(-r)).epsilon(1e-10));
  }
  const Grid g = Grid::equidistant(7);
  CHECK(matern_cov(g, half)(0, 1) == doctest::Approx(std::exp(-1.0 / 6 / 0.2)).epsilon(1e-10));
  CHECK(error_code_of([&] { matern_cov(g, MaternParams{1.5, 0.0, 1.0}); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("Gaussian sampler") {
  Rng rng(1);
  CHECK(sample_gaussian(Matrix::Zero(3, 3), 10, rng).cwiseAbs().maxCoeff() == 0.0);

  const Matrix I = Matrix::Identity(4, 4);
  CHECK(max_abs_diff(sample_covariance(sample_gaussian(I, 100000, rng)), I) < 0.05);

  const Grid g = Grid::equidistant(8);
  const Matrix C = matern_cov(g);
  const Eigen::Index N = 100000;
  const Matrix S = sample_covariance(sample_gaussian(C, N, rng));
  for (Eigen::Index a = 0; a < 8; ++a) {
    for (Eigen::Index b = 0; b < 8; ++b) {
      const double se = std::sqrt((C(a, a) * C(b, b) + C(a, b) * C(a, b)) / N);
      CHECK(std::abs(S(a, b) - C(a, b)) < 4 * se);
    }
  }
  CHECK(error_code_of([] { GaussianSampler(-Matrix::Identity(2, 2)); }) == ErrorCode::NonPSD);
  const GaussianSampler sampler(C);
  CHECK(max_abs_diff(sampler.root() * sampler.root(), C) < 1e-10);
}

TEST_CASE("random orthonormal matrices") {
  Rng rng(7);
  const Matrix q1 = random_orthonormal(1, rng);
  CHECK(std::abs(q1(0, 0)) == 1.0);
  for (Eigen::Index T : {2, 5, 50}) {
    const Matrix Q = random_orthonormal(T, rng);
    CHECK(max_abs_diff(Q.transpose() * Q, Matrix::Identity(T, T)) <= 1e-10);
  }
  const Eigen::Index T = 5;
  const int draws = 10000;
  double sum = 0.0;
  for (int r = 0; r < draws; ++r) sum += random_orthonormal(T, rng)(0, 0);
  // Q11 has mean 0 and variance 1/T under the Haar measure.
  CHECK(std::abs(sum / draws) < 3 * std::sqrt(1.0 / T / draws));
}

TEST_CASE("multivariate t errors") {
  Rng rng(3);
  const MVTParams identity = make_mvt_params(Matrix::Identity(4, 4));
  CHECK(identity.lambda_diag[0] == 1.0);
  CHECK(identity.lambda_diag[3] == 3.0);
  CHECK(identity.lambda_diag[1] == doctest::Approx(5.0 / 3.0));

  MVTParams p = identity;
  p.Delta = Matrix::Identity(4, 4);
  p.Delta_root = Matrix::Identity(4, 4);
  CHECK(max_abs_diff(sample_covariance(sample_mvt(p, 100000, rng)), 2.0 * Matrix::Identity(4, 4)) < 0.1);

  p.nu = 1e6;
  CHECK(max_abs_diff(sample_covariance(sample_mvt(p, 100000, rng)), Matrix::Identity(4, 4)) < 0.03);

  p.nu = 4.0;
  const Matrix heavy = sample_mvt(p, 100000, rng);
  const Matrix light = sample_gaussian(2.0 * Matrix::Identity(4, 4), 100000, rng);
  std::vector<double> h(heavy.col(0).data(), heavy.col(0).data() + heavy.rows());
  std::vector<double> l(light.col(0).data(), light.col(0).data() + light.rows());
  CHECK(quantile(h, 0.999) > quantile(l, 0.999));

  const MVTParams drawn = make_mvt_params(6, rng);
  CHECK(max_abs_diff(drawn.Q.transpose() * drawn.Q, Matrix::Identity(6, 6)) <= 1e-10);
  CHECK(max_abs_diff(drawn.Delta_root * drawn.Delta_root, drawn.Delta) < 1e-10);
  CHECK(error_code_of([] { make_mvt_params(Matrix::Identity(2, 2), 2.0); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("simulated covariates") {
  Rng rng(5);
  const Eigen::Index n = 100000;
  const Matrix X = gen_covariates(n, rng);
  CHECK(X.col(0).isOnes());
  CHECK(std::abs(X.col(5).mean() - 1.8) < 3 * std::sqrt(0.72 / n));
  CHECK(std::abs(X.col(4).mean() - 0.2) < 3 * std::sqrt(0.16 / n));
  CHECK(X.col(4).array().unaryExpr([](double v) { return v == 0.0 || v == 1.0; }).all());
  CHECK(X.col(5).minCoeff() >= 0.0);
  CHECK(X.col(5).maxCoeff() <= 3.0);
  const Matrix S = sample_covariance(X.middleCols(1, 3));
  const Matrix sigma = rows({{1, 0.2, 0.3}, {0.2, 2, 0.6}, {0.3, 0.6, 0.4}});
  for (Eigen::Index a = 0; a < 3; ++a) {
    for (Eigen::Index b = 0; b < 3; ++b) {
      const double se = std::sqrt((sigma(a, a) * sigma(b, b) + sigma(a, b) * sigma(a, b)) / n);
      CHECK(std::abs(S(a, b) - sigma(a, b)) < 4 * se);
    }
  }
  const Vector means = X.middleCols(1, 3).colwise().mean().transpose();
  CHECK(std::abs(means[0] + 2.0) < 0.02);
  CHECK(std::abs(means[1] - 4.0) < 0.03);
  CHECK(std::abs(means[2]) < 0.01);
}

TEST_CASE("coefficient functions") {
  const Grid g(vec({0.0, 0.5, 1.0}));
  const Matrix B = true_beta(g);
  CHECK(B(0, 0) == 40.0);
  CHECK(B(1, 0) == 0.0);
  CHECK(B(2, 0) == 2.0);
  CHECK(B(3, 0) == doctest::Approx(-3.4538776394910684).epsilon(1e-14));
  CHECK(B(4, 0) == 0.0);
  CHECK(B(5, 0) == 2.0);
  CHECK(B(0, 2) == 39.0);
  CHECK(B(1, 2) == doctest::Approx(-1.5136049906158565).epsilon(1e-14));
  CHECK(B(2, 2) == doctest::Approx(2.7163378145367737).epsilon(1e-14));
  CHECK(B(3, 2) == doctest::Approx(2.4438608095954200).epsilon(1e-14));
  CHECK(B(4, 2) == doctest::Approx(0.45464871341284085).epsilon(1e-14));
  CHECK(B(5, 2) == doctest::Approx(1.8).epsilon(1e-14));
  CHECK(B(5, 1) == doctest::Approx(1.575).epsilon(1e-14));
}

TEST_CASE("true mean curve") {
  CHECK(covariate_means() == vec({1, -2, 4, 0, 0.2, 1.8}));
  const Grid g = Grid::equidistant(11);
  const Vector mu = true_mu(g);
  const Matrix B = true_beta(g);
  for (Eigen::Index j = 0; j < 11; ++j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < 6; ++k) s += covariate_means()[k] * B(k, j);
    CHECK(mu[j] == doctest::Approx(s).epsilon(1e-14));
  }
  Rng rng(12);
  const Eigen::Index n = 1000000;
  const Vector y = gen_covariates(n, rng) * B.col(5);  // t = 0.5
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(n - 1));
  CHECK(std::abs(mean - mu[5]) < 3 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("noiseless simulated data identify beta") {
  SimConfig cfg;
  cfg.n = 500;
  cfg.matern.variance = 0.0;
  const StudyContext ctx = StudyContext::make(cfg);
  Rng rng(4);
  const SimulatedData sim = gen_dataset(cfg, ctx, rng);
  const OutcomeModel om = fit_ols(sim.dataset);
  CHECK(max_abs_diff(om.B_hat, ctx.beta) < 1e-8);
  CHECK(sim.Y_full.rows() == cfg.n);
  CHECK(sim.Y_full.allFinite());
}

TEST_CASE("observed fraction with literal and sign-flipped missingness") {
  SimConfig cfg;
  cfg.n = 1000000;
  cfg.T = 2;
  for (bool calibrated : {false, true}) {
    cfg.calibrate_missingness = calibrated;
    const StudyContext ctx = StudyContext::make(cfg);
    Rng rng(derive_seed(cfg.seed, 123));
    const double frac = static_cast<double>(gen_dataset(cfg, ctx, rng).dataset.n_observed()) /
                        static_cast<double>(cfg.n);
    MESSAGE("calibrate_missingness=" << calibrated << " observed fraction " << frac);
    CHECK(frac == doctest::Approx(calibrated ? 0.690 : 0.310).epsilon(0.01));
  }
  CHECK_FALSE(SimConfig{}.calibrate_missingness);
}

TEST_CASE("misspecification scenarios") {
  CHECK(outcome_drop(Misspec::None).empty());
  CHECK(propensity_drop(Misspec::None).empty());
  CHECK(outcome_drop(Misspec::Both) == ColumnSet{2, 4});
  CHECK(propensity_drop(Misspec::Both) == ColumnSet{2, 4});
  CHECK(outcome_drop(Misspec::Missingness).empty());
  CHECK(propensity_drop(Misspec::Outcome).empty());
  for (auto m : {Misspec::None, Misspec::Outcome, Misspec::Missingness, Misspec::Both}) {
    CHECK(parse_misspec(to_string(m)) == m);
  }
  CHECK(parse_error_kind("t") == ErrorKind::MultivariateT);
  CHECK(parse_error_kind("gaussian") == ErrorKind::MaternGaussian);
  CHECK_FALSE(parse_error_kind("cauchy").has_value());
  CHECK_FALSE(parse_misspec("all").has_value());
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.n = 7;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
  cfg = SimConfig{};
  cfg.reps = 0;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
  cfg = SimConfig{};
  cfg.alpha = 1.5;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::LevelOutOfRange);
}

TEST_CASE("replicates replay bit for bit") {
  SimConfig cfg;
  cfg.n = 300;
  cfg.misspec = Misspec::Both;
  cfg.error_kind = ErrorKind::MultivariateT;
  const StudyContext ctx = StudyContext::make(cfg);
  const auto a = run_replication(cfg, ctx, 42), b = run_replication(cfg, ctx, 42);
  REQUIRE_FALSE(a.failed);
  for (std::size_t e = 0; e < kEstimatorCount; ++e) {
    CHECK(a.estimates[e].mu_hat == b.estimates[e].mu_hat);
    CHECK(a.estimates[e].C_hat == b.estimates[e].C_hat);
    CHECK(a.scb[e].u == b.scb[e].u);
    CHECK(a.scb_covers[e] == b.scb_covers[e]);
    CHECK(a.pcb_covers[e] == b.pcb_covers[e]);
  }
  CHECK(a.estimates[0].method == Method::OR);
  CHECK(a.estimates[1].method == Method::DR);
  CHECK(a.estimates[2].method == Method::CC);
  CHECK(run_replication(cfg, ctx, 43).estimates[0].mu_hat != a.estimates[0].mu_hat);
}

TEST_CASE("study output does not depend on the thread count") {
  SimConfig cfg;
  cfg.n = 250;
  cfg.reps = 130;
  cfg.calibrate_missingness = true;
  cfg.misspec = Misspec::Outcome;
  const StudyResult one = run_study(cfg, 1);
  check_same_summary(one, run_study(cfg, 3));
  check_same_summary(one, run_study(cfg, 8));
  cfg.error_kind = ErrorKind::MultivariateT;
  cfg.reps = 70;
  check_same_summary(run_study(cfg, 1), run_study(cfg, 4));
}

TEST_CASE("study aggregates satisfy their identities") {
  SimConfig cfg;
  cfg.n = 400;
  cfg.reps = 200;
  cfg.calibrate_missingness = true;
  for (auto m : {Misspec::None, Misspec::Both}) {
    cfg.misspec = m;
    const StudyResult res = run_study(cfg, 2);
    CHECK(res.replicates == 200);
    CHECK(res.failed == 0);
    CHECK(res.grid.size() == cfg.T);
    CHECK(res.mean_observed_fraction == doctest::Approx(0.69).epsilon(0.05));
    for (std::size_t e = 0; e < kEstimatorCount; ++e) {
      const auto& s = res.summary[e];
      CHECK(s.scb_coverage >= 0.0);
      CHECK(s.scb_coverage <= 100.0);
      CHECK(s.scb_coverage >= s.pcb_coverage);
      CHECK(max_abs_diff(s.mse, s.bias.cwiseProduct(s.bias) + s.mc_variance) <= 1e-10);
      CHECK((s.mse.array() >= s.bias.array().square() - 1e-10).all());
      CHECK((s.est_variance.array() > 0.0).all());
    }
  }
}

TEST_CASE("estimated and Monte Carlo variances agree under correct models") {
  SimConfig cfg;
  cfg.n = 3000;
  cfg.reps = 1000;
  cfg.calibrate_missingness = true;
  const StudyResult res = run_study(cfg, 0);
  for (Method m : {Method::OR, Method::DR}) {
    const auto& s = res.of(m);
    const Vector ratio = s.est_variance.cwiseQuotient(s.mc_variance);
    CHECK(ratio.minCoeff() >= 0.8);
    CHECK(ratio.maxCoeff() <= 1.25);
  }
}

TEST_CASE("excessive replicate failures abort the study") {
  SimConfig cfg;
  cfg.n = 9;
  cfg.reps = 40;
  CHECK(error_code_of([&] { run_study(cfg, 1); }) == ErrorCode::FailureRateExceeded);
}

}

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fnmiss/estimators.hpp>
#include <fnmiss/io.hpp>
#include <fnmiss/simulation.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace fnmiss::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
  std::uint64_t seed = SimConfig{}.seed;
  int threads = 0;
  std::string out_dir = ".";
};

struct PartitionOptions {
  int intervals = 1;
  std::vector<double> breaks;  // 0 = b_0 < b_1 < ... < b_K = 1

  [[nodiscard]] Partition resolve() const {
    if (!breaks.empty()) {
      if (breaks.size() < 2) throw Error(ErrorCode::BadPartition, "--partition needs at least 0 and 1");
      Partition p;
      for (std::size_t k = 0; k + 1 < breaks.size(); ++k) p.push_back({breaks[k], breaks[k + 1]});
      return p;
    }
    if (intervals == 1) return {};
    return equal_partition(intervals);
  }
};

struct EstimateOptions {
  std::string dataset;
  std::vector<std::string> methods{"OR", "DR", "CC"};
  double alpha = 0.05;
  std::vector<int> drop_outcome;     // 1-based covariate indices
  std::vector<int> drop_propensity;  // 1-based covariate indices
  PartitionOptions partition;
};

struct SimulateOptions {
  std::vector<long> sizes{250, 500, 1000, 3000};
  int reps = 1000;
  long T = 50;
  std::string errors = "gaussian";
  std::vector<std::string> misspec{"none", "outcome", "missingness", "both"};
  double alpha = 0.05;
  bool calibrate_missingness = false;
  bool redraw_q = false;
  bool export_dataset = false;
  PartitionOptions partition;
};

struct BandsOptions {
  std::string estimate;
  double alpha = 0.05;
  PartitionOptions partition;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularDesign:
    case ErrorCode::InsufficientObserved:
    case ErrorCode::Separation:
    case ErrorCode::AllSameIndicator:
    case ErrorCode::SingularPi:
    case ErrorCode::ZeroVarianceDiagonal:
    case ErrorCode::NonPSD:
      return kExitEstimation;
    case ErrorCode::FailureRateExceeded:
      return kExitStudy;
    default:
      return kExitInput;
  }
}

Method parse_method(const std::string& s) {
  if (s == "OR") return Method::OR;
  if (s == "DR") return Method::DR;
  if (s == "CC") return Method::CC;
  throw Error(ErrorCode::InvalidConfig, "unknown method '" + s + "'");
}

ColumnSet to_columns(const std::vector<int>& one_based, Eigen::Index p) {
  ColumnSet out;
  for (int c : one_based) {
    if (c < 1 || c > p) {
      throw Error(ErrorCode::InvalidConfig,
                  "covariate x" + std::to_string(c) + " does not exist (p=" + std::to_string(p) + ")");
    }
    out.push_back(c - 1);
  }
  return out;
}

ordered_json one_based(const ColumnSet& cols) {
  ordered_json j = ordered_json::array();
  for (auto c : cols) j.push_back(c + 1);
  return j;
}

ordered_json partition_json(const Partition& p) {
  ordered_json j = ordered_json::array();
  if (p.empty()) j.push_back({0.0, 1.0});
  for (const auto& iv : p) j.push_back({iv.lo, iv.hi});
  return j;
}

void add_partition_options(CLI::App* cmd, PartitionOptions& opts) {
  auto* intervals = cmd->add_option("--intervals", opts.intervals,
                                    "Fairness partition of [0,1] into this many equal intervals")
                        ->check(CLI::PositiveNumber)
                        ->capture_default_str();
  cmd->add_option("--partition", opts.breaks,
                  "Fairness partition as breakpoints 0,b1,...,1 (overrides --intervals)")
      ->delimiter(',')
      ->excludes(intervals);
}

// --------------------------------------------------------------------------

int cmd_estimate(const GlobalOptions& g, const EstimateOptions& o, std::ostream& out) {
  const Dataset ds = io::read_dataset_csv(fs::path(o.dataset));
  const Partition partition = o.partition.resolve();

  std::vector<Method> methods;
  for (const auto& m : o.methods) {
    const Method parsed = parse_method(m);
    if (std::find(methods.begin(), methods.end(), parsed) == methods.end()) methods.push_back(parsed);
  }

  const bool needs_outcome = std::any_of(methods.begin(), methods.end(),
                                         [](Method m) { return m != Method::CC; });
  const bool needs_weights = std::find(methods.begin(), methods.end(), Method::DR) != methods.end();
  const bool fully_observed = ds.n_observed() == ds.n();

  ordered_json manifest;
  manifest["command"] = "estimate";
  manifest["dataset"] = fs::path(o.dataset).filename().string();
  manifest["n"] = ds.n();
  manifest["n_obs"] = ds.n_observed();
  manifest["p"] = ds.p();
  manifest["T"] = ds.T();
  manifest["alpha"] = o.alpha;
  manifest["partition"] = partition_json(partition);

  std::optional<OutcomeModel> om;
  std::optional<DRWeights> weights;
  if (needs_outcome) {
    om = fit_ols(ds, to_columns(o.drop_outcome, ds.p()));
    manifest["outcome_model"] = {{"dropped_columns", one_based(om->dropped_columns)},
                                 {"n_obs", om->n_obs}};
  }
  if (needs_weights) {
    if (fully_observed) {
      // Nothing is missing: the propensity model is degenerate and tau = 1.
      weights = dr_weights(ds, Vector::Ones(ds.n()));
      manifest["propensity_model"] = {{"fitted", false}, {"reason", "no missing outcomes; tau = 1"}};
    } else {
      const PropensityModel pm = fit_logistic(ds, to_columns(o.drop_propensity, ds.p()));
      weights = dr_weights(ds, pm);
      std::vector<double> gamma(pm.gamma_hat.data(), pm.gamma_hat.data() + pm.gamma_hat.size());
      manifest["propensity_model"] = {{"fitted", true},
                                      {"dropped_columns", one_based(pm.dropped_columns)},
                                      {"converged", pm.converged},
                                      {"iterations", pm.iterations},
                                      {"score_norm", pm.score_norm},
                                      {"gamma_hat", gamma}};
    }
    manifest["mean_inv_tau"] = weights->mean_inv_tau;
  }

  const fs::path dir(g.out_dir);
  ordered_json outputs = ordered_json::array();
  for (Method m : methods) {
    MeanEstimate est;
    switch (m) {
      case Method::OR: est = estimate_or(ds, *om); break;
      case Method::DR: est = estimate_dr(ds, *om, *weights); break;
      case Method::CC: est = estimate_cc(ds); break;
    }
    const Band scb = build_scb(est, o.alpha, partition);
    const Band pcb = build_pcb(est, o.alpha);
    const std::string tag(to_string(m));
    io::write_curve_csv(dir / ("estimate_" + tag + ".csv"), scb, pcb);
    io::write_estimate_json(dir / ("estimate_" + tag + ".json"), est);
    outputs.push_back("estimate_" + tag + ".csv");
    outputs.push_back("estimate_" + tag + ".json");
    out << tag << ": mean u_scb " << scb.u.mean() << ", u_pcb " << pcb.u[0] << ", max se "
        << scb.se.maxCoeff() << '\n';
  }
  manifest["methods"] = o.methods;
  manifest["outputs"] = outputs;
  manifest["version"] = FNMISS_VERSION;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

// --------------------------------------------------------------------------

std::string scenario_label(const SimConfig& cfg) {
  return std::string(to_string(cfg.error_kind)) + "/" + std::string(to_string(cfg.misspec)) +
         "/n=" + std::to_string(cfg.n);
}

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, std::ostream& out) {
  const auto kind = parse_error_kind(o.errors);
  if (!kind) throw Error(ErrorCode::InvalidConfig, "--errors must be 'gaussian' or 't'");
  std::vector<Misspec> scenarios;
  for (const auto& s : o.misspec) {
    const auto m = parse_misspec(s);
    if (!m) throw Error(ErrorCode::InvalidConfig, "unknown misspecification '" + s + "'");
    scenarios.push_back(*m);
  }

  SimConfig base;
  base.T = o.T;
  base.reps = o.reps;
  base.error_kind = *kind;
  base.alpha = o.alpha;
  base.seed = g.seed;
  base.partition = o.partition.resolve();
  base.calibrate_missingness = o.calibrate_missingness;
  base.fixed_q = !o.redraw_q;

  const fs::path dir(g.out_dir);
  std::ostringstream coverage, metrics;
  coverage << "n,errors,misspec,estimator,band,coverage,replicates,failed\n";
  metrics << "t,scenario,estimator,bias,est_variance,mc_variance,mse\n";
  ordered_json runs = ordered_json::array();

  for (long n : o.sizes) {
    SimConfig cfg = base;
    cfg.n = n;
    cfg.validate();
    if (o.export_dataset) {
      const StudyContext ctx = StudyContext::make(cfg);
      Rng rng(replicate_seed(cfg, 0));
      const SimulatedData sim = gen_dataset(cfg, ctx, rng);
      io::write_dataset_csv(dir / ("dataset_" + o.errors + "_n" + std::to_string(n) + ".csv"),
                            sim.dataset);
    }
    for (Misspec m : scenarios) {
      cfg.misspec = m;
      const StudyResult res = run_study(cfg, g.threads);
      const std::string label = scenario_label(cfg);
      for (std::size_t e = 0; e < kEstimatorCount; ++e) {
        const auto& s = res.summary[e];
        const std::string est(to_string(kEstimators[e]));
        for (const char* band : {"SCB", "PCB"}) {
          const double cov = std::string(band) == "SCB" ? s.scb_coverage : s.pcb_coverage;
          coverage << n << ',' << o.errors << ',' << to_string(m) << ',' << est << ',' << band << ','
                   << io::format_double(cov) << ',' << res.replicates << ',' << res.failed << '\n';
        }
        for (Eigen::Index j = 0; j < res.grid.size(); ++j) {
          metrics << io::format_double(res.grid[j]) << ',' << label << ',' << est << ','
                  << io::format_double(s.bias[j]) << ',' << io::format_double(s.est_variance[j]) << ','
                  << io::format_double(s.mc_variance[j]) << ',' << io::format_double(s.mse[j]) << '\n';
        }
        out << label << ' ' << est << ": SCB " << s.scb_coverage << "%, PCB " << s.pcb_coverage
            << "%, sup|bias| " << s.bias.cwiseAbs().maxCoeff() << '\n';
      }
      runs.push_back({{"scenario", label},
                      {"replicates", res.replicates},
                      {"failed", res.failed},
                      {"failures", res.failures},
                      {"mean_observed_fraction", res.mean_observed_fraction}});
    }
  }

  io::write_text(dir / "coverage.csv", coverage.str());
  io::write_text(dir / "metrics.csv", metrics.str());
  ordered_json manifest;
  manifest["command"] = "simulate";
  manifest["seed"] = g.seed;
  manifest["errors"] = o.errors;
  manifest["sizes"] = o.sizes;
  manifest["misspec"] = o.misspec;
  manifest["reps"] = o.reps;
  manifest["T"] = o.T;
  manifest["alpha"] = o.alpha;
  manifest["partition"] = partition_json(base.partition);
  manifest["calibrate_missingness"] = o.calibrate_missingness;
  manifest["fixed_q"] = base.fixed_q;
  manifest["runs"] = runs;
  manifest["version"] = FNMISS_VERSION;
  io::write_text(dir / "simulate_manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

// --------------------------------------------------------------------------

int cmd_bands(const GlobalOptions& g, const BandsOptions& o, std::ostream& out) {
  const MeanEstimate est = io::read_estimate_json(fs::path(o.estimate));
  const Partition partition = o.partition.resolve();
  const Band scb = build_scb(est, o.alpha, partition);
  const Band pcb = build_pcb(est, o.alpha);
  const std::string name = "bands_" + std::string(to_string(est.method)) + ".csv";
  io::write_curve_csv(fs::path(g.out_dir) / name, scb, pcb);
  out << name << ": alpha " << o.alpha << ", u_scb in [" << scb.u.minCoeff() << ", "
      << scb.u.maxCoeff() << "]\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean estimation for functional outcomes missing at random", "fnmiss"};
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(FNMISS_VERSION));

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Master seed of the simulation study")->capture_default_str();
  auto* threads_opt =
      app.add_option("--threads", g.threads, "Worker threads for replicates (0: all cores; env FNMISS_THREADS)")
          ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory receiving output files")->capture_default_str();
  app.set_config("--config", "", "Read options from a TOML/INI file (unknown keys are errors)");

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Estimate the mean curve of a dataset CSV with bands");
  estimate->add_option("dataset", est.dataset, "Dataset CSV (# grid line, then id,z,x1..xp,y_1..y_T)")
      ->required();
  estimate->add_option("--methods", est.methods, "Estimators to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"OR", "DR", "CC"}))
      ->capture_default_str();
  estimate->add_option("--alpha", est.alpha, "Nominal error level")->capture_default_str();
  estimate->add_option("--drop-outcome", est.drop_outcome,
                       "1-based covariates left out of the outcome model")
      ->delimiter(',');
  estimate->add_option("--drop-propensity", est.drop_propensity,
                       "1-based covariates left out of the propensity model")
      ->delimiter(',');
  add_partition_options(estimate, est.partition);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo coverage study");
  simulate->add_option("--n", sim.sizes, "Sample sizes")->delimiter(',')->capture_default_str();
  simulate->add_option("--reps", sim.reps, "Replicates per scenario")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--T", sim.T, "Grid points on [0,1]")->capture_default_str();
  simulate->add_option("--errors", sim.errors, "Error process")
      ->check(CLI::IsMember({"gaussian", "t"}))
      ->capture_default_str();
  simulate->add_option("--misspec", sim.misspec, "Misspecification scenarios")
      ->delimiter(',')
      ->check(CLI::IsMember({"none", "outcome", "missingness", "both"}))
      ->capture_default_str();
  simulate->add_option("--alpha", sim.alpha, "Nominal error level")->capture_default_str();
  simulate->add_flag("--calibrate-missingness", sim.calibrate_missingness,
                     "Negate the missingness linear predictor (about 69% observed instead of 31%)");
  simulate->add_flag("--redraw-q", sim.redraw_q,
                     "Draw the t-error rotation Q per replicate instead of once per study");
  simulate->add_flag("--export-dataset", sim.export_dataset,
                     "Also write the first replicate's dataset for each n as CSV");
  add_partition_options(simulate, sim.partition);

  BandsOptions bands;
  auto* bands_cmd = app.add_subcommand("bands", "Recompute bands from a saved estimate JSON");
  bands_cmd->add_option("estimate", bands.estimate, "estimate_<M>.json written by `estimate`")
      ->required();
  bands_cmd->add_option("--alpha", bands.alpha, "Nominal error level")->capture_default_str();
  add_partition_options(bands_cmd, bands.partition);

  for (auto* sub : {estimate, simulate, bands_cmd}) {
    sub->allow_config_extras(CLI::config_extras_mode::error);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (threads_opt->count() == 0) {
    if (const char* env = std::getenv("FNMISS_THREADS"); env != nullptr && *env != '\0') {
      const std::string_view text(env);
      int v = -1;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
      if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || v < 0) {
        err << "fnmiss: FNMISS_THREADS must be a non-negative integer, got '" << text << "'\n";
        return kExitInput;
      }
      g.threads = v;
    }
  }

  try {
    if (*estimate) return cmd_estimate(g, est, out);
    if (*simulate) return cmd_simulate(g, sim, out);
    return cmd_bands(g, bands, out);
  } catch (const Error& e) {
    err << "fnmiss: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "fnmiss: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace fnmiss::cli

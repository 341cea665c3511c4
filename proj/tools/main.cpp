#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "trajcurr/harness.hpp"
#include "trajcurr/numio.hpp"

namespace {

using namespace trajcurr;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitOracle = 2;

// Config file first, then explicit flags on top.
harness::ExperimentConfig resolve_config(const std::string& config_path,
                                         const KeyValueConfig& overrides) {
  KeyValueConfig merged;
  if (!config_path.empty()) merged = KeyValueConfig::load(config_path);
  for (const auto& [k, v] : overrides.entries()) merged.set(k, v);
  return harness::ExperimentConfig::from_config(merged);
}

struct ExperimentFlags {
  std::string config_path;
  std::string variant, env, metric, sampler;
  std::string dim;
  long seed = -1, iterations = -1, particles = -1, candidates = -1;
  double delta = -1.0, epsilon = -1.0, bandwidth_frac = -1.0, theta = -1.0;
  double rho_learn_frac = -1.0, rho_fail_frac = -1.0, metric_lambda_frac = -1.0;
  bool timing = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file");
    cmd->add_option("--variant", variant, "currot|currot_a|currot_ao|currot_l|no_curriculum");
    cmd->add_option("--env", env, "surrogate|tracker");
    cmd->add_option("--context-dim", dim, "51|99|198|399 or 2 (currot_l)");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--iterations", iterations, "active curriculum iterations");
    cmd->add_option("--particles", particles, "particle count N");
    cmd->add_option("--candidates", candidates, "candidates per particle S");
    cmd->add_option("--delta", delta, "success threshold on the rollout metric");
    cmd->add_option("--epsilon", epsilon, "trust region override");
    cmd->add_option("--bandwidth-frac", bandwidth_frac, "kernel bandwidth as fraction of epsilon");
    cmd->add_option("--theta", theta, "cone half angle (radians)");
    cmd->add_option("--rho-learn-frac", rho_learn_frac, "surrogate mastery radius factor");
    cmd->add_option("--rho-fail-frac", rho_fail_frac, "surrogate failure radius factor");
    cmd->add_option("--metric-lambda-frac", metric_lambda_frac,
                    "jerk regularization of the trajectory metric");
    cmd->add_option("--metric", metric, "euclidean|mahalanobis (must match the variant)");
    cmd->add_option("--sampler", sampler, "half_ball|cone (must match the variant)");
    cmd->add_flag("--timing", timing, "record real per-iteration wall time");
  }

  KeyValueConfig overrides() const {
    KeyValueConfig cfg;
    if (!variant.empty()) cfg.set("variant", variant);
    if (!env.empty()) cfg.set("env", env);
    if (!dim.empty()) cfg.set("context_dim", dim);
    if (!metric.empty()) cfg.set("metric", metric);
    if (!sampler.empty()) cfg.set("sampler", sampler);
    if (seed >= 0) cfg.set("seed", seed);
    if (iterations >= 0) cfg.set("iterations", iterations);
    if (particles >= 0) cfg.set("particles", particles);
    if (candidates >= 0) cfg.set("candidates_per_particle", candidates);
    if (delta >= 0.0) cfg.set("delta", delta);
    if (epsilon >= 0.0) cfg.set("epsilon", epsilon);
    if (bandwidth_frac >= 0.0) cfg.set("bandwidth_frac", bandwidth_frac);
    if (theta >= 0.0) cfg.set("theta", theta);
    if (rho_learn_frac >= 0.0) cfg.set("rho_learn_frac", rho_learn_frac);
    if (rho_fail_frac >= 0.0) cfg.set("rho_fail_frac", rho_fail_frac);
    if (metric_lambda_frac >= 0.0) cfg.set("metric_lambda_frac", metric_lambda_frac);
    if (timing) cfg.set("timing", 1L);
    return cfg;
  }
};

int cmd_run(const ExperimentFlags& flags, const std::string& out_dir) {
  auto config = resolve_config(flags.config_path, flags.overrides());
  auto log = harness::run_experiment(config, out_dir);
  std::cout << "variant=" << harness::to_string(config.variant)
            << " seed=" << config.seed << " iterations=" << log.rows.size()
            << " warmup=" << log.warmup_iterations << " epsilon=" << format_double(log.epsilon)
            << " eps_line=" << format_double(log.eps_line);
  if (!log.rows.empty())
    std::cout << " final_w2=" << format_double(log.rows.back().wasserstein);
  std::cout << "\n";
  return kExitOk;
}

int cmd_ablate(const ExperimentFlags& flags, const std::string& out_dir,
               const std::vector<std::string>& variant_names, const std::vector<int>& dims,
               const std::vector<long>& seeds, int workers) {
  auto base = resolve_config(flags.config_path, flags.overrides());
  std::vector<harness::Variant> variants;
  for (const auto& name : variant_names) variants.push_back(harness::variant_from_string(name));
  std::vector<std::uint64_t> seed_list;
  for (long s : seeds) seed_list.push_back(static_cast<std::uint64_t>(s));
  auto result = harness::ablate(base, variants, dims, seed_list, out_dir, workers);
  std::cout << result.summary_csv;
  return kExitOk;
}

int cmd_check(bool inject_fault) {
  auto results = harness::run_checks(inject_fault);
  bool all_pass = true;
  std::printf("%-40s %-6s %s\n", "check", "status", "detail");
  for (const auto& r : results) {
    std::printf("%-40s %-6s %s\n", r.name.c_str(), r.pass ? "pass" : "FAIL", r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  return all_pass ? kExitOk : kExitOracle;
}

int cmd_export_traj(double ax, double ay, double dt, const std::string& out_path) {
  envs::EightEnv env{envs::EightEnv::Params{}};
  auto coords = env.context_for(ax, ay);
  std::vector<double> times;
  for (double t = 0.0; t <= env.params().spec.period + 1e-9; t += dt) times.push_back(t);
  auto csv = lti::trajectory_csv(env.to_lti_context(coords), env.basis(), times);
  if (out_path.empty() || out_path == "-") {
    std::cout << csv;
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    out << csv;
  }
  return kExitOk;
}

int cmd_export_metric(int dim, double lambda_frac, const std::string& out_path, bool binary) {
  envs::EightEnv::Params params;
  params.segments = dim / 3 + 3;
  envs::EightEnv probe{params};
  metric::MetricBuildSpec spec;
  spec.eval_times = metric::MetricBuildSpec::default_eval_times(probe.basis().grid);
  spec.axes = 3;
  Eigen::MatrixXd a0 = metric::build_state_metric(spec, probe.basis());
  if (lambda_frac > 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a0);
    spec.jerk_regularization = lambda_frac * std::sqrt(eig.eigenvalues().maxCoeff());
    a0 = metric::build_state_metric(spec, probe.basis());
  }
  if (binary) {
    metric::save_matrix_binary(a0, out_path);
  } else if (out_path.empty() || out_path == "-") {
    std::cout << metric::matrix_to_csv(a0);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    out << metric::matrix_to_csv(a0);
  }
  return kExitOk;
}

int cmd_export_grid(int segments, const std::string& out_path) {
  auto grid = lti::KnotGrid::preset_eight(segments);
  envs::EightEnv env{envs::EightEnv::Params{segments}};
  std::string text = lti::to_config(grid) + lti::to_config(env.constraints()) +
                     envs::to_config(env.params().spec);
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    out << text;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum generation toolkit for trajectory tracking tasks"};
  app.require_subcommand(1);

  ExperimentFlags run_flags;
  std::string run_out = "out";
  auto* run = app.add_subcommand("run", "run one experiment and log per-iteration stats");
  run_flags.attach(run);
  run->add_option("--out", run_out, "output directory (run.csv, particles_final.json)");

  ExperimentFlags ablate_flags;
  std::string ablate_out = "ablation";
  std::vector<std::string> ablate_variants{"currot", "currot_ao"};
  std::vector<int> ablate_dims{51};
  std::vector<long> ablate_seeds{0, 1, 2};
  int ablate_workers = 1;
  auto* ab = app.add_subcommand("ablate", "run a variant x dimension x seed grid");
  ablate_flags.attach(ab);
  ab->add_option("--out", ablate_out, "output directory for runs and summary.csv");
  ab->add_option("--variants", ablate_variants, "variants to ablate");
  ab->add_option("--dims", ablate_dims, "context dimensions (51 99 198 399)");
  ab->add_option("--seeds", ablate_seeds, "seeds");
  ab->add_option("--workers", ablate_workers, "parallel runs");

  bool inject_fault = false;
  auto* check = app.add_subcommand("check", "run the oracle suites and print a table");
  check->add_flag("--inject-fault", inject_fault,
                  "perturb the kernel basis to demonstrate a failing report");

  auto* exp = app.add_subcommand("export", "export trajectories, metrics or grid presets");
  exp->require_subcommand(1);

  double traj_ax = 0.38, traj_ay = 0.19, traj_dt = 0.008;
  std::string traj_out = "-";
  auto* exp_traj = exp->add_subcommand("traj", "CSV trajectory of a fitted eight");
  exp_traj->add_option("--ax", traj_ax, "x amplitude (m)");
  exp_traj->add_option("--ay", traj_ay, "y amplitude (m)");
  exp_traj->add_option("--dt", traj_dt, "sampling step (s)");
  exp_traj->add_option("--out", traj_out, "output file, - for stdout");

  int metric_dim = 51;
  double metric_lambda_frac = 0.0;
  std::string metric_out = "-";
  bool metric_binary = false;
  auto* exp_metric = exp->add_subcommand("metric", "trajectory metric matrix");
  exp_metric->add_option("--dim", metric_dim, "context dimension");
  exp_metric->add_option("--lambda-frac", metric_lambda_frac, "jerk regularization fraction");
  exp_metric->add_option("--out", metric_out, "output file, - for stdout");
  exp_metric->add_flag("--binary", metric_binary, "dense binary instead of CSV");

  int grid_segments = 20;
  std::string grid_out = "-";
  auto* exp_grid = exp->add_subcommand("grid", "grid preset and constraints as key=value");
  exp_grid->add_option("--segments", grid_segments, "segment count");
  exp_grid->add_option("--out", grid_out, "output file, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags, run_out);
    if (ab->parsed())
      return cmd_ablate(ablate_flags, ablate_out, ablate_variants, ablate_dims, ablate_seeds,
                        ablate_workers);
    if (check->parsed()) return cmd_check(inject_fault);
    if (exp->parsed()) {
      if (exp_traj->parsed()) return cmd_export_traj(traj_ax, traj_ay, traj_dt, traj_out);
      if (exp_metric->parsed())
        return cmd_export_metric(metric_dim, metric_lambda_frac, metric_out, metric_binary);
      if (exp_grid->parsed()) return cmd_export_grid(grid_segments, grid_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

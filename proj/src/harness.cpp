#include "trajcurr/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <thread>

#include "trajcurr/numio.hpp"
#include "trajcurr/oracles.hpp"
#include "trajcurr/parallel.hpp"

namespace trajcurr::harness {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Currot: return "currot";
    case Variant::CurrotA: return "currot_a";
    case Variant::CurrotAO: return "currot_ao";
    case Variant::CurrotL: return "currot_l";
    case Variant::NoCurriculum: return "no_curriculum";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "currot") return Variant::Currot;
  if (s == "currot_a") return Variant::CurrotA;
  if (s == "currot_ao") return Variant::CurrotAO;
  if (s == "currot_l") return Variant::CurrotL;
  if (s == "no_curriculum") return Variant::NoCurriculum;
  throw std::invalid_argument("unknown variant: " + s);
}

void ExperimentConfig::validate() const {
  if (low_dim()) {
    if (context_dim != 2)
      throw std::invalid_argument("currot_l runs in the 2-D amplitude space (context_dim=2)");
  } else {
    if (context_dim == 2)
      throw std::invalid_argument("context_dim=2 is reserved for currot_l");
    if (context_dim % 3 != 0 || grid_segments() < 4)
      throw std::invalid_argument("context_dim must be 3*(K-3) for some grid size K >= 4");
  }
  if (particles < 2) throw std::invalid_argument("need at least 2 particles");
  if (iterations < 1) throw std::invalid_argument("need at least 1 iteration");
  if (candidates_per_particle < 1) throw std::invalid_argument("need at least 1 candidate");
  if (!(theta > 0.0) || !(theta < 0.5 * 3.14159265358979323846))
    throw std::invalid_argument("theta must lie in (0, pi/2)");
  if (!(bandwidth_frac > 0.0)) throw std::invalid_argument("bandwidth_frac must be positive");
  if (!(rho_learn_frac > 0.0) || rho_fail_frac < rho_learn_frac)
    throw std::invalid_argument("need 0 < rho_learn_frac <= rho_fail_frac");
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  ExperimentConfig c;
  c.variant = variant_from_string(cfg.get_or("variant", "currot_ao"));
  auto env = cfg.get_or("env", "surrogate");
  if (env == "surrogate")
    c.env = EnvKind::Surrogate;
  else if (env == "tracker")
    c.env = EnvKind::Tracker;
  else
    throw std::invalid_argument("unknown env: " + env);
  auto dim_text = cfg.get_or("context_dim", c.variant == Variant::CurrotL ? "2" : "51");
  c.context_dim = dim_text == "lowdim-2" ? 2 : static_cast<int>(std::stol(dim_text));
  c.seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 0));
  c.iterations = cfg.get_int_or("iterations", c.iterations);
  c.max_warmup_iterations = cfg.get_int_or("max_warmup_iterations", c.max_warmup_iterations);
  c.particles = static_cast<int>(cfg.get_int_or("particles", c.particles));
  c.candidates_per_particle =
      static_cast<int>(cfg.get_int_or("candidates_per_particle", c.candidates_per_particle));
  c.delta = cfg.get_double_or("delta", c.delta);
  c.bandwidth_frac = cfg.get_double_or("bandwidth_frac", c.bandwidth_frac);
  c.theta = cfg.get_double_or("theta", c.theta);
  c.epsilon_override = cfg.get_double_or("epsilon", 0.0);
  c.rho_learn_frac = cfg.get_double_or("rho_learn_frac", c.rho_learn_frac);
  c.rho_fail_frac = cfg.get_double_or("rho_fail_frac", c.rho_fail_frac);
  c.p0_radius_frac = cfg.get_double_or("p0_radius_frac", c.p0_radius_frac);
  c.t_max = cfg.get_double_or("t_max", c.t_max);
  c.metric_lambda_frac = cfg.get_double_or("metric_lambda_frac", c.metric_lambda_frac);
  c.timing = cfg.get_int_or("timing", 0) != 0;

  // Derived settings may be stated explicitly but must agree with the
  // variant.
  auto expect = [&](const char* key, const std::string& required) {
    if (!cfg.has(key)) return;
    if (cfg.get(key) != required)
      throw std::invalid_argument(std::string(key) + "=" + cfg.get(key) +
                                  " contradicts variant " + to_string(c.variant) +
                                  " (requires " + required + ")");
  };
  switch (c.variant) {
    case Variant::Currot:
    case Variant::CurrotL:
      expect("metric", "euclidean");
      expect("sampler", "half_ball");
      break;
    case Variant::CurrotA:
      expect("metric", "mahalanobis");
      expect("sampler", "half_ball");
      break;
    case Variant::CurrotAO:
      expect("metric", "mahalanobis");
      expect("sampler", "cone");
      break;
    case Variant::NoCurriculum:
      break;
  }
  c.validate();
  return c;
}

KeyValueConfig ExperimentConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("variant", to_string(variant));
  cfg.set("env", env == EnvKind::Surrogate ? "surrogate" : "tracker");
  cfg.set("context_dim", static_cast<long>(context_dim));
  cfg.set("seed", static_cast<long>(seed));
  cfg.set("iterations", iterations);
  cfg.set("max_warmup_iterations", max_warmup_iterations);
  cfg.set("particles", static_cast<long>(particles));
  cfg.set("candidates_per_particle", static_cast<long>(candidates_per_particle));
  cfg.set("delta", delta);
  cfg.set("bandwidth_frac", bandwidth_frac);
  cfg.set("theta", theta);
  if (epsilon_override > 0.0) cfg.set("epsilon", epsilon_override);
  cfg.set("rho_learn_frac", rho_learn_frac);
  cfg.set("rho_fail_frac", rho_fail_frac);
  cfg.set("p0_radius_frac", p0_radius_frac);
  cfg.set("t_max", t_max);
  cfg.set("metric_lambda_frac", metric_lambda_frac);
  cfg.set("timing", static_cast<long>(timing ? 1 : 0));
  return cfg;
}

namespace {

constexpr std::uint64_t kEpsSamplesTag = 0xe551;
constexpr std::uint64_t kP0Tag = 0x1407;
constexpr std::uint64_t kInitialW2Tag = 0xba5e;
constexpr std::uint64_t kFreshDrawTag = 0xfeed;
constexpr std::uint64_t kTrackerTag = 0x7c4e;

struct RunSetup {
  // Heap-held so the callbacks below can capture a stable address.
  std::unique_ptr<envs::EightEnv> env;
  metric::MetricSpec curriculum_metric;
  curriculum::CurriculumConfig curr_config;
  curriculum::UpdateEnv update_env;
  std::function<Eigen::VectorXd(RngStream&)> mu_sampler;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> to_coords;  // run space -> coords
  Eigen::MatrixXd p0;
  double rho_learn = 0.0;
  double rho_fail = 0.0;
};

envs::EightEnv build_env(const ExperimentConfig& config) {
  envs::EightEnv::Params params;
  params.segments = config.low_dim() ? 20 : config.grid_segments();
  // Resolve the jerk regularization relative to the unregularized spectrum.
  if (config.metric_lambda_frac > 0.0) {
    lti::KernelBasis basis = lti::kernel_basis(
        lti::KnotGrid::uniform(params.spec.move_start, params.spec.move_end, params.segments));
    metric::MetricBuildSpec spec;
    spec.eval_times = metric::MetricBuildSpec::default_eval_times(basis.grid);
    spec.axes = 3;
    Eigen::MatrixXd a0 = metric::build_state_metric(spec, basis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a0);
    params.metric_lambda = config.metric_lambda_frac * std::sqrt(eig.eigenvalues().maxCoeff());
  }
  return envs::EightEnv(std::move(params));
}

RunSetup build_setup(const ExperimentConfig& config) {
  RunSetup setup;
  setup.env = std::make_unique<envs::EightEnv>(build_env(config));
  const auto& env = *setup.env;
  const int n = config.particles;

  // Sample set for the diameter estimates: the rest context plus target
  // draws, shared by every variant for a given seed.
  RngStream eps_rng(config.seed, kEpsSamplesTag);
  const int n_eps = std::max(64, n);
  Eigen::MatrixXd eps_amps(n_eps, 2);
  for (int i = 0; i < n_eps; ++i) eps_amps.row(i) = env.sample_amplitudes(eps_rng).transpose();

  Eigen::MatrixXd eps_high(n_eps + 1, env.context_dim());
  eps_high.row(0).setZero();
  for (int i = 0; i < n_eps; ++i)
    eps_high.row(i + 1) = env.context_for(eps_amps(i, 0), eps_amps(i, 1)).transpose();

  // Competence radii live in the trajectory metric regardless of variant.
  double eps_env =
      curriculum::default_trust_region(eps_high, env.trajectory_metric()).value;
  setup.rho_learn = config.rho_learn_frac * eps_env;
  setup.rho_fail = config.rho_fail_frac * eps_env;

  const bool low = config.low_dim();
  switch (config.variant) {
    case Variant::Currot:
    case Variant::CurrotL:
    case Variant::NoCurriculum:
      setup.curriculum_metric = metric::MetricSpec::euclidean();
      break;
    case Variant::CurrotA:
    case Variant::CurrotAO:
      setup.curriculum_metric = env.trajectory_metric();
      break;
  }

  Eigen::MatrixXd eps_samples;
  if (low) {
    eps_samples.resize(n_eps + 1, 2);
    eps_samples.row(0).setZero();
    eps_samples.bottomRows(n_eps) = eps_amps;
  } else {
    eps_samples = eps_high;
  }
  double epsilon =
      config.epsilon_override > 0.0
          ? config.epsilon_override
          : curriculum::default_trust_region(eps_samples, setup.curriculum_metric).value;

  setup.curr_config.epsilon = epsilon;
  setup.curr_config.delta = config.delta;
  setup.curr_config.bandwidth = config.bandwidth_frac * epsilon;
  setup.curr_config.theta = config.theta;
  setup.curr_config.candidates_per_particle = config.candidates_per_particle;
  setup.curr_config.sampler = config.variant == Variant::CurrotAO ? curriculum::SamplerKind::Cone
                                                                  : curriculum::SamplerKind::HalfBall;
  setup.curr_config.metric = setup.curriculum_metric;
  setup.curr_config.seed = config.seed;

  const envs::EightEnv* env_ptr = setup.env.get();
  if (low) {
    setup.mu_sampler = [env_ptr](RngStream& rng) -> Eigen::VectorXd {
      return env_ptr->sample_amplitudes(rng);
    };
    setup.to_coords = [env_ptr](const Eigen::VectorXd& a) {
      return env_ptr->context_for(a(0), a(1));
    };
    setup.update_env.feasible = [env_ptr](const Eigen::VectorXd& a) {
      return a.size() == 2 && env_ptr->feasible_amplitudes(a(0), a(1));
    };
  } else {
    setup.mu_sampler = [env_ptr](RngStream& rng) { return env_ptr->sample_target(rng); };
    setup.to_coords = [](const Eigen::VectorXd& c) { return c; };
    setup.update_env.feasible = [env_ptr](const Eigen::VectorXd& c) {
      return env_ptr->feasible(c);
    };
  }

  // Initial particles: a tight ball around the rest task, conservatively
  // scaled so it sits well inside the mastered region in every metric.
  RngStream p0_rng(config.seed, kP0Tag);
  double sigma_max = 1.0;
  if (!env.trajectory_metric().is_euclidean()) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(env.trajectory_metric().whitening);
    sigma_max = svd.singularValues()(0);
  }
  const int dim = low ? 2 : env.context_dim();
  double gain = sigma_max;
  if (low) {
    // Largest trajectory-metric gain of the amplitude map, estimated along
    // the axes near zero.
    double h = 1e-3;
    double gx = metric::distance(env.trajectory_metric(), env.context_for(h, 0.0),
                                 env.context_for(0.0, 0.0)) /
                h;
    double gy = metric::distance(env.trajectory_metric(), env.context_for(0.0, h),
                                 env.context_for(0.0, 0.0)) /
                h;
    gain = std::sqrt(2.0) * std::max(gx, gy);
  }
  double p0_radius = config.p0_radius_frac * setup.rho_learn / gain;
  setup.p0.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int tries = 0;; ++tries) {
      Eigen::VectorXd g(dim);
      for (int d = 0; d < dim; ++d) g(d) = p0_rng.gaussian();
      double norm = g.norm();
      if (norm == 0.0) continue;
      double r = p0_radius * std::pow(p0_rng.uniform(), 1.0 / dim);
      Eigen::VectorXd candidate = (r / norm) * g;
      if (setup.update_env.feasible(candidate)) {
        setup.p0.row(i) = candidate.transpose();
        break;
      }
      if (tries > 100)
        throw std::runtime_error("could not draw feasible initial particles");
    }
  }
  return setup;
}

void append_row(std::ofstream* out, const RunRow& row) {
  if (!out || !out->is_open()) return;
  *out << row.iteration << ',' << format_double(row.wasserstein) << ','
       << format_double(row.mean_metric) << ',' << format_double(row.success_rate) << ','
       << format_double(row.moved_fraction) << ',' << format_double(row.wall_time) << '\n';
  out->flush();
}

}  // namespace

RunLog run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  RunSetup setup = build_setup(config);
  const auto& env = *setup.env;
  const int n = config.particles;
  const bool no_curriculum = config.variant == Variant::NoCurriculum;

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.open(out_dir + "/run.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + out_dir + "/run.csv");
    csv << "#schema=1\n";
    csv << "iteration,wasserstein,mean_metric,success_rate,moved_fraction,wall_time\n";
    csv.flush();
  }

  RunLog log;
  log.epsilon = setup.curr_config.epsilon;

  envs::SurrogateLearner learner(env.trajectory_metric(), setup.rho_learn, setup.rho_fail,
                                 config.t_max);
  learner.master(Eigen::VectorXd::Zero(env.context_dim()));

  curriculum::CurriculumState state;
  state.particles.contexts = setup.p0;

  // Reference transport distance for normalization, against a dedicated
  // target draw.
  if (!no_curriculum) {
    RngStream w0_rng(config.seed, kInitialW2Tag);
    Eigen::MatrixXd ref_targets(n, state.particles.dim());
    for (int i = 0; i < n; ++i) ref_targets.row(i) = setup.mu_sampler(w0_rng).transpose();
    log.initial_w2 =
        transport::wasserstein2(setup.p0, ref_targets, setup.curriculum_metric).value;
    log.eps_line = log.initial_w2 > 0.0 ? log.epsilon / log.initial_w2 : 0.0;
  }

  competence::PerformanceBuffer buffer(2 * static_cast<std::size_t>(n),
                                       2 * static_cast<std::size_t>(n), config.delta);

  long active_done = 0;
  long warmup_done = 0;
  long iteration = 0;
  while (active_done < config.iterations) {
    auto tic = std::chrono::steady_clock::now();

    // Tasks this iteration trains on: the particles, or fresh target draws
    // for the curriculum-free baseline.
    Eigen::MatrixXd tasks;
    if (no_curriculum) {
      RngStream fresh(config.seed, kFreshDrawTag, static_cast<std::uint64_t>(iteration));
      tasks.resize(n, state.particles.dim());
      for (int i = 0; i < n; ++i) tasks.row(i) = setup.mu_sampler(fresh).transpose();
    } else {
      tasks = state.particles.contexts;
    }

    std::vector<competence::RolloutRecord> rollouts(n);
    std::vector<Eigen::VectorXd> trained(n);
    if (config.env == EnvKind::Surrogate) {
      const envs::SurrogateLearner* learner_ptr = &learner;
      parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Eigen::VectorXd task = tasks.row(static_cast<Eigen::Index>(i)).transpose();
        Eigen::VectorXd coords = setup.to_coords(task);
        auto record = learner_ptr->rollout(coords);
        record.context = task;  // regression runs in the curriculum space
        rollouts[i] = std::move(record);
        trained[i] = std::move(coords);
      });
    } else {
      parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        Eigen::VectorXd task = tasks.row(static_cast<Eigen::Index>(i)).transpose();
        Eigen::VectorXd coords = setup.to_coords(task);
        RngStream seed_rng(config.seed, kTrackerTag, static_cast<std::uint64_t>(iteration),
                           static_cast<std::uint64_t>(i));
        auto record = envs::tracker_rollout(env, coords, config.tracker,
                                            seed_rng.engine()());
        record.context = task;
        rollouts[i] = std::move(record);
        trained[i] = std::move(coords);
      });
    }

    if (config.env == EnvKind::Surrogate) learner.train(trained);

    RunRow row;
    row.iteration = iteration;
    double metric_sum = 0.0;
    for (const auto& r : rollouts) metric_sum += r.metric_value;
    row.mean_metric = metric_sum / n;

    if (no_curriculum) {
      int successes = 0;
      for (const auto& r : rollouts)
        if (competence::success_indicator(r, config.delta)) ++successes;
      row.success_rate = static_cast<double>(successes) / n;
      row.wasserstein = std::numeric_limits<double>::quiet_NaN();
      ++active_done;
    } else {
      auto stats = curriculum::curriculum_step(state, setup.mu_sampler, rollouts, buffer,
                                               setup.curr_config, setup.update_env);
      row.success_rate = stats.success_rate;
      row.moved_fraction = stats.moved_fraction;
      row.wasserstein = log.initial_w2 > 0.0 ? stats.wasserstein / log.initial_w2
                                             : stats.wasserstein;
      if (stats.active) {
        ++active_done;
      } else {
        ++warmup_done;
        if (warmup_done > config.max_warmup_iterations)
          throw std::runtime_error("warmup did not finish within " +
                                   std::to_string(config.max_warmup_iterations) +
                                   " iterations");
      }
    }

    if (config.timing) {
      auto toc = std::chrono::steady_clock::now();
      row.wall_time = std::chrono::duration<double>(toc - tic).count();
    }
    log.rows.push_back(row);
    append_row(csv.is_open() ? &csv : nullptr, row);
    ++iteration;
  }

  log.warmup_iterations = warmup_done;
  log.final_particles = state.particles;
  if (!out_dir.empty()) {
    std::ofstream particles(out_dir + "/particles_final.json", std::ios::trunc);
    particles << curriculum::particles_to_json(state.particles, iteration);
  }
  return log;
}

std::string run_csv(const RunLog& log) {
  std::string out = "#schema=1\n";
  out += "iteration,wasserstein,mean_metric,success_rate,moved_fraction,wall_time\n";
  for (const auto& row : log.rows) {
    out += std::to_string(row.iteration);
    out += ",";
    out += format_double(row.wasserstein);
    out += ",";
    out += format_double(row.mean_metric);
    out += ",";
    out += format_double(row.success_rate);
    out += ",";
    out += format_double(row.moved_fraction);
    out += ",";
    out += format_double(row.wall_time);
    out += "\n";
  }
  return out;
}

namespace {

// First iteration with normalized W2 below 5%; censored at the trace length
// when never reached.
long iterations_to_target(const RunLog& log) {
  long index = 0;
  for (const auto& row : log.rows) {
    if (!std::isnan(row.wasserstein) && row.wasserstein < 0.05) return index;
    ++index;
  }
  return static_cast<long>(log.rows.size());
}

}  // namespace

AblationResult ablate(const ExperimentConfig& base, const std::vector<Variant>& variants,
                      const std::vector<int>& dims, const std::vector<std::uint64_t>& seeds,
                      const std::string& out_dir, int workers) {
  struct Job {
    Variant variant;
    int dim;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto v : variants)
    for (int d : dims)
      for (auto s : seeds) jobs.push_back({v, d, s});

  struct Outcome {
    bool failed = true;
    double final_w2 = 0.0;
    long to_target = 0;
  };
  std::vector<Outcome> outcomes(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      ExperimentConfig config = base;
      config.variant = job.variant;
      config.context_dim = job.variant == Variant::CurrotL ? 2 : job.dim;
      config.seed = job.seed;
      std::string run_dir;
      if (!out_dir.empty())
        run_dir = out_dir + "/" + to_string(job.variant) + "_d" + std::to_string(job.dim) +
                  "_s" + std::to_string(job.seed);
      try {
        RunLog log = run_experiment(config, run_dir);
        Outcome o;
        o.failed = false;
        o.final_w2 = log.rows.empty() ? 0.0 : log.rows.back().wasserstein;
        o.to_target = iterations_to_target(log);
        outcomes[j] = o;
      } catch (const std::exception&) {
        outcomes[j].failed = true;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  AblationResult result;
  result.summary_csv =
      "#schema=1\nvariant,context_dim,seeds,failures,mean_iterations_to_target,"
      "stderr_iterations_to_target,mean_final_w2,stderr_final_w2\n";
  for (auto v : variants) {
    for (int d : dims) {
      AblationCell cell;
      cell.variant = v;
      cell.context_dim = d;
      std::vector<double> w2s, iters;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].variant != v || jobs[j].dim != d) continue;
        ++cell.seeds;
        if (outcomes[j].failed) {
          ++cell.failures;
          continue;
        }
        w2s.push_back(outcomes[j].final_w2);
        iters.push_back(static_cast<double>(outcomes[j].to_target));
      }
      auto mean_stderr = [](const std::vector<double>& xs) {
        if (xs.empty()) return std::pair<double, double>{0.0, 0.0};
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        if (xs.size() < 2) return std::pair<double, double>{mean, 0.0};
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size() - 1);
        return std::pair<double, double>{mean, std::sqrt(var / xs.size())};
      };
      auto [mi, si] = mean_stderr(iters);
      auto [mw, sw] = mean_stderr(w2s);
      cell.mean_iterations_to_target = mi;
      cell.stderr_iterations_to_target = si;
      cell.mean_final_w2 = mw;
      cell.stderr_final_w2 = sw;
      result.cells.push_back(cell);

      result.summary_csv += to_string(v);
      result.summary_csv += "," + std::to_string(d);
      result.summary_csv += "," + std::to_string(cell.seeds);
      result.summary_csv += "," + std::to_string(cell.failures);
      result.summary_csv += "," + format_double(mi);
      result.summary_csv += "," + format_double(si);
      result.summary_csv += "," + format_double(mw);
      result.summary_csv += "," + format_double(sw);
      result.summary_csv += "\n";
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/summary.csv", std::ios::trunc);
    out << result.summary_csv;
  }
  return result;
}

std::vector<CheckResult> run_checks(bool inject_fault) {
  std::vector<CheckResult> results;

  {  // closed-form segment response vs quadrature
    RngStream rng(11, 0x1);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      double t_lo = rng.uniform(0.0, 10.0);
      double t_hi = t_lo + rng.uniform(0.0, 5.0);
      double t = rng.uniform(0.0, 15.0);
      worst = std::max(worst, (lti::jerk_segment_response(t_lo, t_hi, t) -
                               oracles::simpson_segment_response(t_lo, t_hi, t))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    results.push_back({"lti.segment_response_vs_quadrature", worst < 1e-9,
                       "max error " + format_double(worst)});
  }

  {  // transition matrix vs RK4
    RngStream rng(11, 0x2);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      double dt = rng.uniform(0.0, 5.0);
      worst = std::max(worst, (lti::transition_matrix(dt) - oracles::rk4_transition(dt))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    results.push_back(
        {"lti.transition_vs_rk4", worst < 1e-9, "max error " + format_double(worst)});
  }

  {  // kernel residual (optionally under an injected fault)
    auto basis = lti::kernel_basis(lti::KnotGrid::preset_eight());
    if (inject_fault) basis.basis(0, 0) += 1e-3;
    double residual = oracles::kernel_residual(basis);
    results.push_back(
        {"lti.kernel_residual", residual < 1e-10, "max residual " + format_double(residual)});
  }

  {  // auction vs enumeration
    RngStream rng(11, 0x3);
    double worst_gap = 0.0;
    for (int i = 0; i < 50; ++i) {
      int n = 5 + static_cast<int>(rng.engine()() % 3);
      Eigen::MatrixXd cost(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) cost(r, c) = rng.uniform(0.0, 10.0);
      transport::AuctionConfig cfg;
      auto resolved = cfg.resolved(cost);
      auto auctioned = transport::auction_assign(cost, cfg);
      auto exact = transport::brute_force_assign(cost);
      double slack = n * resolved.eps_min + 1e-12;
      worst_gap = std::max(worst_gap, (auctioned.total_cost - exact.total_cost) - slack);
    }
    results.push_back({"assignment.auction_vs_enumeration", worst_gap <= 0.0,
                       "worst excess over slack " + format_double(worst_gap)});
  }

  {  // trajectory metric vs rollout state energy
    envs::EightEnv env{envs::EightEnv::Params{}};
    metric::MetricBuildSpec spec;
    spec.eval_times = metric::MetricBuildSpec::default_eval_times(env.basis().grid);
    spec.axes = 3;
    Eigen::MatrixXd a = metric::build_state_metric(spec, env.basis());
    RngStream rng(11, 0x4);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd c1(env.context_dim()), c2(env.context_dim());
      for (int d = 0; d < env.context_dim(); ++d) {
        c1(d) = rng.gaussian();
        c2(d) = rng.gaussian();
      }
      double quad = (c1 - c2).dot(a * (c1 - c2));
      auto s1 = lti::rollout(env.to_lti_context(c1), env.basis(), spec.eval_times);
      auto s2 = lti::rollout(env.to_lti_context(c2), env.basis(), spec.eval_times);
      double energy = 0.0;
      for (std::size_t ti = 0; ti < spec.eval_times.size(); ++ti)
        for (int axis = 0; axis < 3; ++axis) {
          double dp = s1[ti][axis].position - s2[ti][axis].position;
          double dv = s1[ti][axis].velocity - s2[ti][axis].velocity;
          double da = s1[ti][axis].acceleration - s2[ti][axis].acceleration;
          energy += dp * dp + dv * dv + da * da;
        }
      worst = std::max(worst, std::abs(quad - energy) / std::max(1.0, energy));
    }
    results.push_back({"metric.vs_rollout_energy", worst < 1e-8,
                       "max relative error " + format_double(worst)});
  }

  {  // delay distribution
    envs::DelayQueue<int> queue(RngStream(11, 0x5), envs::DelayQueue<int>::default_pmf, 0.0);
    const long draws = 200000;
    for (long i = 0; i < draws; ++i) {
      queue.push(static_cast<int>(i));
      queue.tick();
    }
    double worst = 0.0;
    for (std::size_t d = 0; d < 5; ++d) {
      double expected = envs::DelayQueue<int>::default_pmf[d];
      double got = static_cast<double>(queue.draw_counts()[d]) / draws;
      worst = std::max(worst, std::abs(got - expected));
    }
    results.push_back(
        {"envs.delay_pmf", worst < 0.005, "max pmf deviation " + format_double(worst)});
  }

  return results;
}

}  // namespace trajcurr::harness

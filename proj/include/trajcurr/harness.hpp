#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajcurr/config.hpp"
#include "trajcurr/currot.hpp"
#include "trajcurr/envs.hpp"

namespace trajcurr::harness {

enum class Variant { Currot, CurrotA, CurrotAO, CurrotL, NoCurriculum };
enum class EnvKind { Surrogate, Tracker };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// One experiment run. Derived settings (metric kind, sampler, low vs high
/// dimensional context space) follow from the variant; explicit overrides
/// that contradict the variant are configuration errors.
struct ExperimentConfig {
  Variant variant = Variant::CurrotAO;
  EnvKind env = EnvKind::Surrogate;
  int context_dim = 51;  // 51 | 99 | 198 | 399, or 2 for currot_l
  std::uint64_t seed = 0;
  long iterations = 200;  // active curriculum iterations
  long max_warmup_iterations = 100;
  int particles = 512;
  int candidates_per_particle = 128;
  double delta = 1400.0;
  double bandwidth_frac = 0.3;  // h = frac * epsilon
  double theta = 0.25 * 3.14159265358979323846;
  double epsilon_override = 0.0;  // 0: 5% of the sampled diameter

  // Surrogate learner, radii relative to the trajectory-metric trust radius.
  double rho_learn_frac = 1.05;
  double rho_fail_frac = 4.0;
  double p0_radius_frac = 0.5;  // times rho_learn
  double t_max = 1500.0;

  // Trajectory metric regularization, relative to sqrt(lambda_max) of the
  // unregularized metric.
  double metric_lambda_frac = 0.1;

  envs::TrackerConfig tracker;
  bool timing = false;  // real wall_time column; off keeps logs byte-stable

  void validate() const;
  static ExperimentConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;

  int grid_segments() const { return context_dim / 3 + 3; }
  bool low_dim() const { return variant == Variant::CurrotL; }
};

struct RunRow {
  long iteration = 0;
  double wasserstein = 0.0;  // normalized by the initial transport distance
  double mean_metric = 0.0;
  double success_rate = 0.0;
  double moved_fraction = 0.0;
  double wall_time = 0.0;
};

struct RunLog {
  std::vector<RunRow> rows;
  double epsilon = 0.0;        // curriculum trust radius
  double initial_w2 = 0.0;     // unnormalized W2(p0, mu)
  double eps_line = 0.0;       // epsilon / initial_w2, the stall reference
  long warmup_iterations = 0;
  curriculum::ParticleSet final_particles;
};

/// Runs one experiment; when out_dir is nonempty, writes run.csv (flushed
/// per iteration) and particles_final.json there.
RunLog run_experiment(const ExperimentConfig& config, const std::string& out_dir = "");

std::string run_csv(const RunLog& log);

struct AblationCell {
  Variant variant;
  int context_dim = 0;
  int seeds = 0;
  int failures = 0;
  double mean_iterations_to_target = 0.0;  // censored at the budget
  double stderr_iterations_to_target = 0.0;
  double mean_final_w2 = 0.0;
  double stderr_final_w2 = 0.0;
};

struct AblationResult {
  std::vector<AblationCell> cells;
  std::string summary_csv;
};

/// Cross product of variants x dims x seeds; per-run failures are recorded
/// and the remaining cells still run. Runs are distributed over a worker
/// pool; each run owns its output directory.
AblationResult ablate(const ExperimentConfig& base, const std::vector<Variant>& variants,
                      const std::vector<int>& dims, const std::vector<std::uint64_t>& seeds,
                      const std::string& out_dir, int workers = 1);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Fast oracle suite: closed forms against quadrature and step-wise
/// propagation, auction against enumeration, the trajectory metric against
/// rollout energies, and the delay distribution against its target.
/// inject_fault perturbs the kernel basis to demonstrate a failing report.
std::vector<CheckResult> run_checks(bool inject_fault = false);

}  // namespace trajcurr::harness

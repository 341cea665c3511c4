#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trajcurr/assignment.hpp"
#include "trajcurr/competence.hpp"
#include "trajcurr/metric.hpp"
#include "trajcurr/random.hpp"

namespace trajcurr::curriculum {

/// Training distribution as N context rows.
struct ParticleSet {
  Eigen::MatrixXd contexts;

  int size() const { return static_cast<int>(contexts.rows()); }
  int dim() const { return static_cast<int>(contexts.cols()); }
};

enum class SamplerKind { HalfBall, Cone };

struct CurriculumConfig {
  double epsilon = 1.0;  // trust region radius, in metric units
  double delta = 0.0;    // success threshold on the rollout metric
  double bandwidth = 0.3;
  double theta = 0.25 * 3.14159265358979323846;  // cone half angle
  int candidates_per_particle = 128;
  SamplerKind sampler = SamplerKind::HalfBall;
  metric::MetricSpec metric;
  std::uint64_t seed = 0;
};

enum class Phase { Warmup, Active };

struct CurriculumState {
  Phase phase = Phase::Warmup;
  ParticleSet particles;
  long iteration = 0;
};

struct StepStats {
  long iteration = 0;
  bool active = false;
  double wasserstein = 0.0;  // against this iteration's target draw, post update
  double success_rate = 0.0;
  double moved_fraction = 0.0;
};

struct TrustRegionEstimate {
  double value = 0.0;
  bool degenerate = false;  // all samples coincide
};

/// 5% of the sampled context-space diameter, the usual trust-region choice.
TrustRegionEstimate default_trust_region(const Eigen::MatrixXd& context_samples,
                                         const metric::MetricSpec& metric);

/// Mean predicted metric over the initial particles reaches delta. An empty
/// buffer keeps the curriculum in warmup.
bool warmup_check(const competence::Regressor& reg, const competence::RegressionSnapshot& snap,
                  const Eigen::MatrixXd& whitened_p0, double delta);
bool warmup_check(const competence::Regressor& reg, const competence::PerformanceBuffer& buffer,
                  const Eigen::MatrixXd& p0_particles, double delta);

/// Uniform draw from the epsilon ball around center restricted to the half
/// space facing the target. Whitened coordinates in and out.
Eigen::VectorXd half_ball_sample(const Eigen::VectorXd& center, const Eigen::VectorXd& target,
                                 double epsilon, RngStream& rng);

/// Direction within angle theta of (target - center), uniform on the
/// spherical cap; radius uniform on [0, epsilon]. Whitened coordinates.
Eigen::VectorXd cone_sample(const Eigen::VectorXd& center, const Eigen::VectorXd& target,
                            double epsilon, double theta, RngStream& rng);

/// Everything update_particle needs besides the particle itself. The
/// feasibility callback receives raw (unwhitened) contexts.
struct UpdateEnv {
  const competence::RegressionSnapshot* snapshot = nullptr;
  std::function<bool(const Eigen::VectorXd&)> feasible;
};

/// Moves one particle toward its target: the best candidate (by distance to
/// the target) among sampled ones that predict at least delta and satisfy
/// the constraints, the unchanged particle, and the target itself when it is
/// within reach. Never moves farther than epsilon.
Eigen::VectorXd update_particle(const Eigen::VectorXd& particle, const Eigen::VectorXd& target,
                                const UpdateEnv& env, const CurriculumConfig& config,
                                RngStream& rng);

/// One curriculum iteration: buffer update, warmup gate, and (when active)
/// target resampling, assignment and the per-particle updates. Rollouts must
/// match the current particles one to one.
StepStats curriculum_step(CurriculumState& state,
                          const std::function<Eigen::VectorXd(RngStream&)>& mu_sampler,
                          const std::vector<competence::RolloutRecord>& rollouts,
                          competence::PerformanceBuffer& buffer,
                          const CurriculumConfig& config, const UpdateEnv& env);

std::string particles_to_json(const ParticleSet& particles, long iteration);
ParticleSet particles_from_json(const std::string& text, long* iteration = nullptr);

}  // namespace trajcurr::curriculum

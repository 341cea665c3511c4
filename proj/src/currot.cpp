#include "trajcurr/currot.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "trajcurr/parallel.hpp"

namespace trajcurr::curriculum {

TrustRegionEstimate default_trust_region(const Eigen::MatrixXd& context_samples,
                                         const metric::MetricSpec& metric) {
  if (context_samples.rows() < 2)
    throw std::invalid_argument("trust region estimate needs at least 2 samples");
  Eigen::MatrixXd sq =
      metric::squared_distance_matrix(metric, context_samples, context_samples);
  double diameter = std::sqrt(sq.maxCoeff());
  return TrustRegionEstimate{0.05 * diameter, diameter == 0.0};
}

bool warmup_check(const competence::Regressor& reg, const competence::RegressionSnapshot& snap,
                  const Eigen::MatrixXd& whitened_p0, double delta) {
  if (snap.empty()) return false;
  Eigen::VectorXd predictions = competence::predict_whitened(reg, snap, whitened_p0);
  return predictions.mean() >= delta;
}

bool warmup_check(const competence::Regressor& reg, const competence::PerformanceBuffer& buffer,
                  const Eigen::MatrixXd& p0_particles, double delta) {
  if (buffer.empty()) return false;
  auto snap = competence::snapshot(buffer, reg.metric);
  return warmup_check(reg, snap, reg.metric.whiten_rows(p0_particles), delta);
}

namespace {

Eigen::VectorXd gaussian_vector(Eigen::Index dim, RngStream& rng) {
  Eigen::VectorXd g(dim);
  for (Eigen::Index i = 0; i < dim; ++i) g(i) = rng.gaussian();
  return g;
}

}  // namespace

Eigen::VectorXd half_ball_sample(const Eigen::VectorXd& center, const Eigen::VectorXd& target,
                                 double epsilon, RngStream& rng) {
  const Eigen::Index dim = center.size();
  Eigen::VectorXd axis = target - center;
  double axis_norm = axis.norm();
  if (axis_norm == 0.0) throw std::invalid_argument("half ball sample needs center != target");
  axis /= axis_norm;

  Eigen::VectorXd dir = gaussian_vector(dim, rng);
  double norm = dir.norm();
  while (norm == 0.0) {
    dir = gaussian_vector(dim, rng);
    norm = dir.norm();
  }
  double radius = epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  Eigen::VectorXd step = (radius / norm) * dir;

  // Reflect across the separating hyperplane instead of rejecting; the
  // reflection is an isometry, so uniformity on the half ball is preserved.
  double along = step.dot(axis);
  if (along < 0.0) step -= 2.0 * along * axis;
  return center + step;
}

Eigen::VectorXd cone_sample(const Eigen::VectorXd& center, const Eigen::VectorXd& target,
                            double epsilon, double theta, RngStream& rng) {
  const Eigen::Index dim = center.size();
  Eigen::VectorXd axis = target - center;
  double axis_norm = axis.norm();
  if (axis_norm == 0.0) throw std::invalid_argument("cone sample needs center != target");
  axis /= axis_norm;

  double radius = epsilon * rng.uniform();
  if (dim == 1) return center + radius * axis;

  // cos(beta) for a uniform direction on the sphere follows a symmetric
  // Beta law; restricting to the cap is a truncation of that law, inverted
  // exactly via the incomplete beta function.
  const double a = 0.5 * static_cast<double>(dim - 1);
  const double z_min = std::cos(theta);
  const double u_lo = boost::math::ibeta(a, a, 0.5 * (z_min + 1.0));
  double u = u_lo + (1.0 - u_lo) * rng.uniform();
  u = std::min(u, 1.0);
  double z = 2.0 * boost::math::ibeta_inv(a, a, u) - 1.0;
  z = std::clamp(z, z_min, 1.0);

  Eigen::VectorXd ortho = gaussian_vector(dim, rng);
  ortho -= ortho.dot(axis) * axis;
  double ortho_norm = ortho.norm();
  while (ortho_norm < 1e-12) {
    ortho = gaussian_vector(dim, rng);
    ortho -= ortho.dot(axis) * axis;
    ortho_norm = ortho.norm();
  }
  ortho /= ortho_norm;

  Eigen::VectorXd dir = z * axis + std::sqrt(std::max(0.0, 1.0 - z * z)) * ortho;
  return center + radius * dir;
}

Eigen::VectorXd update_particle(const Eigen::VectorXd& particle, const Eigen::VectorXd& target,
                                const UpdateEnv& env, const CurriculumConfig& config,
                                RngStream& rng) {
  const auto& metric = config.metric;
  Eigen::VectorXd white_particle = metric.whiten(particle);
  Eigen::VectorXd white_target = metric.whiten(target);
  double target_dist = (white_target - white_particle).norm();
  if (target_dist == 0.0) return particle;

  const int S = config.candidates_per_particle;
  Eigen::MatrixXd candidates(S + 1, white_particle.size());
  for (int s = 0; s < S; ++s) {
    Eigen::VectorXd c =
        config.sampler == SamplerKind::Cone
            ? cone_sample(white_particle, white_target, config.epsilon, config.theta, rng)
            : half_ball_sample(white_particle, white_target, config.epsilon, rng);
    candidates.row(s) = c.transpose();
  }
  candidates.row(S) = white_target.transpose();

  competence::Regressor reg{config.bandwidth, metric::MetricSpec::euclidean()};
  Eigen::VectorXd predicted = competence::predict_whitened(reg, *env.snapshot, candidates);

  // Start from the unchanged particle so the distance to the target never
  // increases, then scan sampled survivors and finally the target itself.
  double best_dist = target_dist;
  Eigen::VectorXd best_raw = particle;
  bool target_in_reach = target_dist <= config.epsilon;
  for (int s = 0; s < S + 1; ++s) {
    if (s == S && !target_in_reach) continue;
    if (predicted(s) < config.delta) continue;
    double dist = (candidates.row(s).transpose() - white_target).norm();
    if (dist >= best_dist) continue;
    Eigen::VectorXd raw = metric.unwhiten(candidates.row(s).transpose());
    if (s == S) raw = target;  // avoid round-trip noise on the exact snap
    if (!env.feasible(raw)) continue;
    best_dist = dist;
    best_raw = raw;
  }
  return best_raw;
}

StepStats curriculum_step(CurriculumState& state,
                          const std::function<Eigen::VectorXd(RngStream&)>& mu_sampler,
                          const std::vector<competence::RolloutRecord>& rollouts,
                          competence::PerformanceBuffer& buffer,
                          const CurriculumConfig& config, const UpdateEnv& env) {
  const int n = state.particles.size();
  if (static_cast<int>(rollouts.size()) != n)
    throw std::invalid_argument("rollout count does not match particle count");

  buffer.insert(rollouts);
  auto snap = competence::snapshot(buffer, config.metric);

  StepStats stats;
  stats.iteration = state.iteration;
  int successes = 0;
  for (const auto& r : rollouts)
    if (competence::success_indicator(r, config.delta)) ++successes;
  stats.success_rate = static_cast<double>(successes) / n;

  competence::Regressor reg{config.bandwidth, config.metric};
  if (state.phase == Phase::Warmup) {
    Eigen::MatrixXd whitened = config.metric.whiten_rows(state.particles.contexts);
    if (warmup_check(reg, snap, whitened, config.delta)) state.phase = Phase::Active;
  }

  // Fresh target draws every iteration, also while warming up so the logged
  // transport distance has a consistent meaning.
  RngStream target_rng(config.seed, 0x7a26ull, static_cast<std::uint64_t>(state.iteration));
  Eigen::MatrixXd targets(n, state.particles.dim());
  for (int i = 0; i < n; ++i) targets.row(i) = mu_sampler(target_rng).transpose();

  if (state.phase == Phase::Active) {
    stats.active = true;
    auto pre = transport::wasserstein2(state.particles.contexts, targets, config.metric);

    Eigen::MatrixXd updated(n, state.particles.dim());
    std::vector<char> moved(n, 0);
    UpdateEnv local_env{&snap, env.feasible};
    const Eigen::MatrixXd& particles = state.particles.contexts;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      RngStream rng(config.seed, 0x9a27ull, static_cast<std::uint64_t>(state.iteration),
                    static_cast<std::uint64_t>(i));
      Eigen::VectorXd before = particles.row(static_cast<Eigen::Index>(i)).transpose();
      Eigen::VectorXd target =
          targets.row(pre.assignment.phi[static_cast<int>(i)]).transpose();
      Eigen::VectorXd after = update_particle(before, target, local_env, config, rng);
      updated.row(static_cast<Eigen::Index>(i)) = after.transpose();
      moved[i] = (after.array() != before.array()).any() ? 1 : 0;
    });

    state.particles.contexts = std::move(updated);
    int moved_count = 0;
    for (char m : moved) moved_count += m;
    stats.moved_fraction = static_cast<double>(moved_count) / n;
    stats.wasserstein =
        transport::wasserstein2(state.particles.contexts, targets, config.metric).value;
  } else {
    stats.wasserstein =
        transport::wasserstein2(state.particles.contexts, targets, config.metric).value;
  }

  ++state.iteration;
  return stats;
}

std::string particles_to_json(const ParticleSet& particles, long iteration) {
  nlohmann::json j;
  j["iteration"] = iteration;
  auto contexts = nlohmann::json::array();
  for (Eigen::Index r = 0; r < particles.contexts.rows(); ++r) {
    Eigen::VectorXd v = particles.contexts.row(r).transpose();
    contexts.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  j["contexts"] = contexts;
  return j.dump(2) + "\n";
}

ParticleSet particles_from_json(const std::string& text, long* iteration) {
  auto j = nlohmann::json::parse(text);
  if (iteration) *iteration = j.at("iteration").get<long>();
  auto rows = j.at("contexts").get<std::vector<std::vector<double>>>();
  ParticleSet set;
  if (rows.empty()) return set;
  set.contexts.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      set.contexts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return set;
}

}  // namespace trajcurr::curriculum

#pragma once

#include <Eigen/Dense>
#include <array>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "trajcurr/competence.hpp"
#include "trajcurr/lti.hpp"
#include "trajcurr/metric.hpp"
#include "trajcurr/random.hpp"

namespace trajcurr::envs {

/// Figure-eight targets on a sphere. The amplitude ranges describe the
/// target distribution; the limits bound where the parameterization is valid
/// at all (curricula travel through small amplitudes on their way out).
struct EightTargetSpec {
  double amp_x_min = 0.36, amp_x_max = 0.40;
  double amp_y_min = 0.18, amp_y_max = 0.20;
  double amp_x_limit = 0.45, amp_y_limit = 0.45;
  double sphere_radius = 1.0;
  Eigen::Vector3d sphere_center = Eigen::Vector3d::Zero();
  double period = 12.0;
  double move_start = 1.0, move_end = 11.0;

  Eigen::Vector3d start_position() const {
    return sphere_center + Eigen::Vector3d(0.0, 0.0, sphere_radius);
  }
};

/// Position of the spherical figure eight at time t. Stationary outside the
/// movement window; a quintic time warp brings the shape to rest at both
/// ends so the closing constraint can hold.
Eigen::Vector3d eight_position(const EightTargetSpec& spec, double amp_x, double amp_y,
                               double t);

std::string to_config(const EightTargetSpec& spec);
EightTargetSpec eight_spec_from_config(const std::string& text);

/// Deterministic stand-in for the learning agent: competence is perfect
/// within rho_learn of a mastered task (distances in the trajectory metric)
/// and decays linearly to zero at rho_fail. Training extends mastery only
/// near already-mastered tasks, which is what makes curricula matter.
class SurrogateLearner {
public:
  SurrogateLearner(metric::MetricSpec metric, double rho_learn, double rho_fail,
                   double t_max = 1500.0);

  /// Unconditionally adds a mastered center (initial competence).
  void master(const Eigen::VectorXd& context);

  double distance_to_mastered(const Eigen::VectorXd& context) const;

  competence::RolloutRecord rollout(const Eigen::VectorXd& context) const;

  /// Contexts within rho_learn of the mastered set become mastered; a batch
  /// is re-scanned until settled so chains extend in one call.
  void train(const std::vector<Eigen::VectorXd>& contexts);

  std::size_t mastered_count() const { return static_cast<std::size_t>(count_); }
  double rho_learn() const { return rho_learn_; }
  double rho_fail() const { return rho_fail_; }
  double t_max() const { return t_max_; }

private:
  void append_whitened(const Eigen::VectorXd& whitened);
  double distance_to_mastered_whitened(const Eigen::VectorXd& whitened) const;

  metric::MetricSpec metric_;
  double rho_learn_;
  double rho_fail_;
  double t_max_;
  Eigen::MatrixXd whitened_centers_;  // row capacity grows geometrically
  Eigen::Index count_ = 0;
};

/// FIFO observation queue with per-packet delay draws and a per-tick chance
/// of dropping the head. A packet never overtakes an earlier one.
template <typename Payload>
class DelayQueue {
public:
  static constexpr std::array<double, 5> default_pmf{0.905, 0.035, 0.02, 0.02, 0.02};

  DelayQueue(RngStream rng, std::array<double, 5> pmf = default_pmf, double drop_prob = 0.25)
      : rng_(std::move(rng)), pmf_(pmf), drop_prob_(drop_prob) {}

  void push(Payload payload) {
    int delay = rng_.categorical(pmf_.data(), static_cast<int>(pmf_.size()));
    entries_.push_back(Entry{std::move(payload), ticks_, ticks_ + delay});
    ++draw_counts_[delay];
  }

  /// Completes one timestep: at most one drop check, then every packet whose
  /// release has passed leaves in push order.
  std::vector<Payload> tick() {
    long now = ticks_;
    if (!entries_.empty() && drop_prob_ > 0.0 && rng_.bernoulli(drop_prob_))
      entries_.pop_front();
    std::vector<Payload> delivered;
    while (!entries_.empty() && entries_.front().release <= now) {
      delivered.push_back(std::move(entries_.front().payload));
      entries_.pop_front();
    }
    ++ticks_;
    return delivered;
  }

  std::size_t pending() const { return entries_.size(); }
  long ticks() const { return ticks_; }
  const std::array<long, 5>& draw_counts() const { return draw_counts_; }

private:
  struct Entry {
    Payload payload;
    long arrival;
    long release;
  };

  RngStream rng_;
  std::array<double, 5> pmf_;
  double drop_prob_;
  std::deque<Entry> entries_;
  long ticks_ = 0;
  std::array<long, 5> draw_counts_{};
};

/// First-order exponential action filter, one smoothing factor per channel.
class ActionFilter {
public:
  explicit ActionFilter(Eigen::VectorXd omega)
      : omega_(std::move(omega)), state_(Eigen::VectorXd::Zero(omega_.size())) {}

  const Eigen::VectorXd& operator()(const Eigen::VectorXd& action);
  const Eigen::VectorXd& state() const { return state_; }

private:
  Eigen::VectorXd omega_;
  Eigen::VectorXd state_;
};

struct RewardParams {
  double alpha = -8.0;  // tipping penalty parameter
  double discount = 0.992;
  double tracking_weight = 1000.0;
  double velocity_weight = 0.1;
  double posture_weight = 0.1;
  double action_weight = 1e-3;
  /// Uses the tipping branch verbatim (-alpha / (1 - discount)), which turns
  /// positive for negative alpha; off by default so tipping always penalizes.
  bool raw_tipped_sign = false;
};

double reward(double tracking_error, double joint_vel_sq, double posture_dev_sq,
              double action_sq, bool tipped, const RewardParams& params);

/// Everything the eight-shaped experiment shares: grid, kernel basis, the
/// trajectory metric, constraint checking, and the amplitude-to-context map.
class EightEnv {
public:
  struct Params {
    int segments = 20;
    EightTargetSpec spec;
    double jerk_bound = 10.0;
    double position_margin = 0.8;  // box half-width around the start
    double metric_lambda = 0.0;
    double whitening_floor = 1e-8;
    double fit_tolerance = 1e-3;  // documented max deviation of fitted eights
    int waypoint_samples_per_segment = 4;
  };

  explicit EightEnv(Params params);

  const Params& params() const { return params_; }
  const lti::KernelBasis& basis() const { return basis_; }
  const lti::TrajectoryConstraints& constraints() const { return constraints_; }
  const metric::MetricSpec& trajectory_metric() const { return trajectory_metric_; }
  const lti::FeasibilityChecker& checker() const { return checker_; }
  int context_dim() const { return 3 * basis_.coords_per_axis(); }
  Eigen::VectorXd start_positions() const;

  /// Least-squares kernel coordinates reproducing the eight; throws when the
  /// fit residual exceeds 10x the documented tolerance.
  Eigen::VectorXd context_for(double amp_x, double amp_y) const;

  lti::Context to_lti_context(const Eigen::VectorXd& coords) const;
  bool feasible(const Eigen::VectorXd& coords) const;
  bool feasible_amplitudes(double amp_x, double amp_y) const;

  Eigen::Vector2d sample_amplitudes(RngStream& rng) const;
  Eigen::VectorXd sample_target(RngStream& rng) const;

private:
  Params params_;
  lti::KernelBasis basis_;
  lti::TrajectoryConstraints constraints_;
  metric::MetricSpec trajectory_metric_;
  lti::FeasibilityChecker checker_;
  std::unique_ptr<lti::WaypointFitter> fitter_;
  Eigen::MatrixXd fit_design_;  // residual check against the waypoints
};

struct TrackerConfig {
  double dt = 0.008;  // 125 Hz
  int episode_len = 1500;
  double e_max = 0.1;  // tip-equivalent tracking error
  double kp = 400.0;
  double kd = 40.0;
  double filter_omega = 0.6;
  std::array<double, 5> delay_pmf = DelayQueue<Eigen::Vector3d>::default_pmf;
  double drop_prob = 0.25;
  RewardParams reward;
};

/// Steps a double-integrator point mass with a PD controller fed by delayed
/// target observations; ends early once the error reaches e_max.
competence::RolloutRecord tracker_rollout(const EightEnv& env, const Eigen::VectorXd& coords,
                                          const TrackerConfig& config, std::uint64_t seed);

}  // namespace trajcurr::envs

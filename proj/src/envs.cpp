#include "trajcurr/envs.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "trajcurr/config.hpp"

namespace trajcurr::envs {

namespace {

// Time warp with smootherstep speed ramps around a constant-speed plateau:
// starts and ends at rest with zero acceleration, symmetric about 0.5. The
// plateau keeps the peak speed low enough for the piece-wise constant jerk
// representation to track the shape closely.
constexpr double kRampFraction = 1.0 / 3.0;

double ramp_integral(double x) {  // integral of 6x^5 - 15x^4 + 10x^3
  return x * x * x * x * (2.5 + x * (-3.0 + x));
}

double ease(double s) {
  const double r = kRampFraction;
  const double v = 1.0 / (1.0 - r);  // plateau speed
  if (s <= r) return v * r * ramp_integral(s / r);
  if (s >= 1.0 - r) return 1.0 - v * r * ramp_integral((1.0 - s) / r);
  return v * (0.5 * r + (s - r));
}

}  // namespace

Eigen::Vector3d eight_position(const EightTargetSpec& spec, double amp_x, double amp_y,
                               double t) {
  if (std::abs(amp_x) > spec.amp_x_limit || std::abs(amp_y) > spec.amp_y_limit)
    throw std::invalid_argument("eight amplitudes outside the valid envelope");
  if (t < 0.0 || t > spec.period)
    throw std::invalid_argument("eight evaluation time outside [0, period]");

  double s = (t - spec.move_start) / (spec.move_end - spec.move_start);
  s = std::clamp(s, 0.0, 1.0);
  double warped = ease(s);

  const double two_pi = 2.0 * 3.14159265358979323846;
  double x = amp_x * std::sin(two_pi * warped);
  double y = amp_y * std::sin(2.0 * two_pi * warped);
  double r = spec.sphere_radius;
  double z = std::sqrt(r * r - x * x - y * y);
  return spec.sphere_center + Eigen::Vector3d(x, y, z);
}

std::string to_config(const EightTargetSpec& spec) {
  KeyValueConfig cfg;
  cfg.set("eight.amp_x_range", std::vector<double>{spec.amp_x_min, spec.amp_x_max});
  cfg.set("eight.amp_y_range", std::vector<double>{spec.amp_y_min, spec.amp_y_max});
  cfg.set("eight.amp_limits", std::vector<double>{spec.amp_x_limit, spec.amp_y_limit});
  cfg.set("eight.sphere_radius", spec.sphere_radius);
  cfg.set("eight.sphere_center", std::vector<double>{spec.sphere_center.x(),
                                                     spec.sphere_center.y(),
                                                     spec.sphere_center.z()});
  cfg.set("eight.period", spec.period);
  cfg.set("eight.move_window", std::vector<double>{spec.move_start, spec.move_end});
  return cfg.serialize();
}

EightTargetSpec eight_spec_from_config(const std::string& text) {
  auto cfg = KeyValueConfig::parse(text);
  EightTargetSpec spec;
  auto xr = cfg.get_doubles("eight.amp_x_range");
  auto yr = cfg.get_doubles("eight.amp_y_range");
  auto lim = cfg.get_doubles("eight.amp_limits");
  auto center = cfg.get_doubles("eight.sphere_center");
  auto window = cfg.get_doubles("eight.move_window");
  if (xr.size() != 2 || yr.size() != 2 || lim.size() != 2 || center.size() != 3 ||
      window.size() != 2)
    throw std::invalid_argument("malformed eight target spec config");
  spec.amp_x_min = xr[0];
  spec.amp_x_max = xr[1];
  spec.amp_y_min = yr[0];
  spec.amp_y_max = yr[1];
  spec.amp_x_limit = lim[0];
  spec.amp_y_limit = lim[1];
  spec.sphere_radius = cfg.get_double("eight.sphere_radius");
  spec.sphere_center = Eigen::Vector3d(center[0], center[1], center[2]);
  spec.period = cfg.get_double("eight.period");
  spec.move_start = window[0];
  spec.move_end = window[1];
  return spec;
}

SurrogateLearner::SurrogateLearner(metric::MetricSpec metric, double rho_learn, double rho_fail,
                                   double t_max)
    : metric_(std::move(metric)), rho_learn_(rho_learn), rho_fail_(rho_fail), t_max_(t_max) {
  if (!(rho_learn_ > 0.0) || rho_fail_ < rho_learn_)
    throw std::invalid_argument("surrogate needs 0 < rho_learn <= rho_fail");
}

void SurrogateLearner::append_whitened(const Eigen::VectorXd& whitened) {
  if (count_ == whitened_centers_.rows()) {
    Eigen::Index grown = std::max<Eigen::Index>(64, whitened_centers_.rows() * 2);
    Eigen::MatrixXd bigger(grown, whitened.size());
    if (count_ > 0) bigger.topRows(count_) = whitened_centers_.topRows(count_);
    whitened_centers_ = std::move(bigger);
  }
  whitened_centers_.row(count_++) = whitened.transpose();
}

void SurrogateLearner::master(const Eigen::VectorXd& context) {
  append_whitened(metric_.whiten(context));
}

double SurrogateLearner::distance_to_mastered_whitened(const Eigen::VectorXd& whitened) const {
  if (count_ == 0) throw std::logic_error("surrogate has no mastered centers");
  return (whitened_centers_.topRows(count_).rowwise() - whitened.transpose())
      .rowwise()
      .norm()
      .minCoeff();
}

double SurrogateLearner::distance_to_mastered(const Eigen::VectorXd& context) const {
  return distance_to_mastered_whitened(metric_.whiten(context));
}

competence::RolloutRecord SurrogateLearner::rollout(const Eigen::VectorXd& context) const {
  double d = distance_to_mastered(context);
  double m;
  if (d <= rho_learn_) {
    m = t_max_;
  } else if (rho_fail_ <= rho_learn_) {
    m = 0.0;
  } else {
    m = t_max_ * std::max(0.0, 1.0 - (d - rho_learn_) / (rho_fail_ - rho_learn_));
  }
  competence::RolloutRecord record;
  record.context = context;
  record.metric_value = m;
  record.steps = std::lround(m);
  record.episode_return = static_cast<double>(record.steps);
  return record;
}

void SurrogateLearner::train(const std::vector<Eigen::VectorXd>& contexts) {
  std::vector<Eigen::VectorXd> whitened;
  whitened.reserve(contexts.size());
  for (const auto& c : contexts) whitened.push_back(metric_.whiten(c));
  std::vector<char> added(contexts.size(), 0);

  // Re-scan so a chain of tasks, each near the previous, is absorbed in one
  // call regardless of input order.
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < whitened.size(); ++i) {
      if (added[i]) continue;
      if (distance_to_mastered_whitened(whitened[i]) <= rho_learn_) {
        append_whitened(whitened[i]);
        added[i] = 1;
        changed = true;
      }
    }
  }
}

const Eigen::VectorXd& ActionFilter::operator()(const Eigen::VectorXd& action) {
  if (action.size() != omega_.size())
    throw std::invalid_argument("action dimension does not match filter");
  state_ = omega_.cwiseProduct(state_) + (Eigen::VectorXd::Ones(omega_.size()) - omega_)
                                             .cwiseProduct(action);
  return state_;
}

double reward(double tracking_error, double joint_vel_sq, double posture_dev_sq,
              double action_sq, bool tipped, const RewardParams& params) {
  if (tipped) {
    double magnitude = std::abs(params.alpha) / (1.0 - params.discount);
    return params.raw_tipped_sign ? -params.alpha / (1.0 - params.discount) : -magnitude;
  }
  return 1.0 - params.tracking_weight * tracking_error * tracking_error -
         params.velocity_weight * joint_vel_sq - params.posture_weight * posture_dev_sq -
         params.action_weight * action_sq;
}

EightEnv::EightEnv(Params params)
    : params_(std::move(params)),
      basis_(lti::kernel_basis(
          lti::KnotGrid::uniform(params_.spec.move_start, params_.spec.move_end,
                                 params_.segments))),
      constraints_([&] {
        lti::TrajectoryConstraints c;
        c.region = lti::TrajectoryConstraints::Region::Box;
        c.center = params_.spec.start_position();
        c.half_size = Eigen::Vector3d::Constant(params_.position_margin);
        c.jerk_bound = params_.jerk_bound;
        return c;
      }()),
      trajectory_metric_([&] {
        metric::MetricBuildSpec spec;
        spec.eval_times = metric::MetricBuildSpec::default_eval_times(basis_.grid);
        spec.jerk_regularization = params_.metric_lambda;
        spec.axes = 3;
        Eigen::MatrixXd matrix = metric::build_state_metric(spec, basis_);
        return metric::MetricSpec::mahalanobis_from(matrix, params_.whitening_floor);
      }()),
      checker_(basis_, constraints_) {
  auto times = lti::constraint_sample_times(basis_.grid, params_.waypoint_samples_per_segment);
  fitter_ = std::make_unique<lti::WaypointFitter>(basis_, times, 0.0);
  fit_design_.resize(static_cast<Eigen::Index>(times.size()), 3);
}

Eigen::VectorXd EightEnv::start_positions() const {
  return params_.spec.start_position();
}

Eigen::VectorXd EightEnv::context_for(double amp_x, double amp_y) const {
  const auto& times = fitter_->times();
  Eigen::MatrixXd waypoints(static_cast<Eigen::Index>(times.size()), 3);
  for (std::size_t i = 0; i < times.size(); ++i)
    waypoints.row(static_cast<Eigen::Index>(i)) =
        eight_position(params_.spec, amp_x, amp_y, times[i]).transpose();

  lti::Context fitted = fitter_->fit(waypoints, start_positions());

  auto states = lti::rollout(fitted, basis_, times);
  double residual = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i)
    for (int a = 0; a < 3; ++a)
      residual = std::max(residual, std::abs(states[i][a].position -
                                             waypoints(static_cast<Eigen::Index>(i), a)));
  if (residual > 10.0 * params_.fit_tolerance)
    throw std::runtime_error("eight fit residual " + std::to_string(residual) +
                             " exceeds 10x tolerance");
  return fitted.coords;
}

lti::Context EightEnv::to_lti_context(const Eigen::VectorXd& coords) const {
  lti::Context context;
  context.coords = coords;
  context.axes = 3;
  context.start_positions = start_positions();
  return context;
}

bool EightEnv::feasible(const Eigen::VectorXd& coords) const {
  return checker_.feasible(to_lti_context(coords));
}

bool EightEnv::feasible_amplitudes(double amp_x, double amp_y) const {
  if (std::abs(amp_x) > params_.spec.amp_x_limit || std::abs(amp_y) > params_.spec.amp_y_limit)
    return false;
  return feasible(context_for(amp_x, amp_y));
}

Eigen::Vector2d EightEnv::sample_amplitudes(RngStream& rng) const {
  return {rng.uniform(params_.spec.amp_x_min, params_.spec.amp_x_max),
          rng.uniform(params_.spec.amp_y_min, params_.spec.amp_y_max)};
}

Eigen::VectorXd EightEnv::sample_target(RngStream& rng) const {
  Eigen::Vector2d amps = sample_amplitudes(rng);
  return context_for(amps.x(), amps.y());
}

competence::RolloutRecord tracker_rollout(const EightEnv& env, const Eigen::VectorXd& coords,
                                          const TrackerConfig& config, std::uint64_t seed) {
  auto context = env.to_lti_context(coords);

  std::vector<double> times(config.episode_len);
  for (int k = 0; k < config.episode_len; ++k) times[k] = k * config.dt;
  auto states = lti::rollout_clamped(context, env.basis(), times);

  DelayQueue<Eigen::Vector3d> queue(RngStream(seed, 0xde1a), config.delay_pmf,
                                    config.drop_prob);
  ActionFilter filter(Eigen::Vector3d::Constant(config.filter_omega));

  Eigen::Vector3d position = env.start_positions();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d observed_target = position;

  double episode_return = 0.0;
  double gamma_pow = 1.0;
  long steps = 0;
  for (int k = 0; k < config.episode_len; ++k) {
    Eigen::Vector3d target(states[k][0].position, states[k][1].position,
                           states[k][2].position);
    queue.push(target);
    auto delivered = queue.tick();
    if (!delivered.empty()) observed_target = delivered.back();

    Eigen::Vector3d command = config.kp * (observed_target - position) - config.kd * velocity;
    Eigen::Vector3d action = filter(command);
    velocity += action * config.dt;
    position += velocity * config.dt;

    double error = (position - target).norm();
    bool tipped = error >= config.e_max;
    double r = reward(error, velocity.squaredNorm(), 0.0, action.squaredNorm(), tipped,
                      config.reward);
    episode_return += gamma_pow * r;
    gamma_pow *= config.reward.discount;
    if (tipped) break;
    ++steps;
  }

  competence::RolloutRecord record;
  record.context = coords;
  record.metric_value = static_cast<double>(steps);
  record.episode_return = episode_return;
  record.steps = steps;
  return record;
}

}  // namespace trajcurr::envs

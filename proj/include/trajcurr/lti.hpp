#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "trajcurr/random.hpp"

namespace trajcurr::lti {

/// Segment boundaries of a piece-wise constant jerk signal. knots[0] and
/// knots[K] delimit the interval on which the trajectory moves.
struct KnotGrid {
  std::vector<double> knots;

  int segments() const { return static_cast<int>(knots.size()) - 1; }
  double t_start() const { return knots.front(); }
  double t_end() const { return knots.back(); }

  /// K+1 evenly spaced knots on [t_start, t_end]. K >= 4, otherwise the
  /// closing constraint leaves no free directions.
  static KnotGrid uniform(double t_start, double t_end, int segments);

  /// Movement on [1, 11] s with K segments (20 unless overridden); the
  /// surrounding padding to [0, 12] s is handled by evaluating the constant
  /// start state outside the grid.
  static KnotGrid preset_eight(int segments = 20);
};

void validate(const KnotGrid& grid);

/// One axis of the triple integrator: position, velocity, acceleration.
struct AxisState {
  double position = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
};

/// Orthonormal basis of the jerk sequences whose trajectory returns to the
/// start state at t_end. basis is K x (K-3); columns have their first
/// nonzero entry positive so the factorization is reproducible.
struct KernelBasis {
  KnotGrid grid;
  Eigen::MatrixXd basis;

  int coords_per_axis() const { return static_cast<int>(basis.cols()); }
};

/// Task vector: kernel coordinates per axis plus the rest position the
/// trajectory starts from.
struct Context {
  Eigen::VectorXd coords;           // axes * (K-3) entries, axis-major
  int axes = 3;                     // 1, 2 or 3
  Eigen::VectorXd start_positions;  // one per axis

  Eigen::VectorXd axis_coords(int axis, int per_axis) const {
    return coords.segment(static_cast<Eigen::Index>(axis) * per_axis, per_axis);
  }
};

void validate(const Context& context, const KernelBasis& basis);

/// Allowed positions (box or ball) and the jerk norm bound.
struct TrajectoryConstraints {
  enum class Region { Box, Ball };
  Region region = Region::Box;
  Eigen::VectorXd center;     // box center or ball center, one entry per axis
  Eigen::VectorXd half_size;  // box half widths (unused for Ball)
  double radius = 0.0;        // ball radius (unused for Box)
  double jerk_bound = 0.0;

  /// Distance from the region, 0 inside.
  double position_violation(const Eigen::VectorXd& p) const;
};

struct FeasibilityReport {
  bool feasible = false;
  double max_position_violation = 0.0;
  double max_jerk_violation = 0.0;
  int samples_per_segment = 0;
};

/// State transition over dt for the triple integrator:
/// [[1, dt, dt^2/2], [0, 1, dt], [0, 0, 1]].
Eigen::Matrix3d transition_matrix(double dt);

/// State response at time t to a unit jerk held on [t_lo, t_hi). Zero before
/// the segment starts; a segment still in progress is integrated up to t.
Eigen::Vector3d jerk_segment_response(double t_lo, double t_hi, double t);

/// 3 x K matrix whose k-th column is the response to segment k's unit jerk.
/// t must lie within the grid.
Eigen::MatrixXd jerk_response_matrix(double t, const KnotGrid& grid);

/// Orthonormal null-space basis of the end-time response matrix, computed by
/// SVD with threshold 1e-10 * sigma_max. Deterministic for a fixed grid.
KernelBasis kernel_basis(const KnotGrid& grid);

/// Closed-form states at the given times, one AxisState per axis per time.
/// Times must lie within the grid.
std::vector<std::vector<AxisState>> rollout(const Context& context, const KernelBasis& basis,
                                            const std::vector<double>& times);

/// Like rollout but times outside the grid evaluate to the constant start
/// state, realizing stationary padding around the movement window.
std::vector<std::vector<AxisState>> rollout_clamped(const Context& context,
                                                    const KernelBasis& basis,
                                                    const std::vector<double>& times);

/// Default time sampling for constraint checks: samples_per_segment points
/// per segment plus the final knot.
std::vector<double> constraint_sample_times(const KnotGrid& grid, int samples_per_segment = 4);

FeasibilityReport check_constraints(const Context& context, const KernelBasis& basis,
                                    const TrajectoryConstraints& constraints,
                                    const std::vector<double>& sample_times,
                                    int samples_per_segment = 4);

FeasibilityReport check_constraints(const Context& context, const KernelBasis& basis,
                                    const TrajectoryConstraints& constraints);

/// Precomputed position responses on a fixed time sampling, for tight loops
/// that feasibility-check many coordinate vectors against one grid. Matches
/// check_constraints on the same sample times.
class FeasibilityChecker {
public:
  FeasibilityChecker(const KernelBasis& basis, TrajectoryConstraints constraints,
                     int samples_per_segment = 4);

  FeasibilityReport check(const Context& context) const;
  bool feasible(const Context& context) const { return check(context).feasible; }

  const std::vector<double>& sample_times() const { return times_; }

private:
  TrajectoryConstraints constraints_;
  std::vector<double> times_;
  Eigen::MatrixXd position_response_;  // |times| x (K-3)
  Eigen::MatrixXd jerk_map_;           // K x (K-3)
  int samples_per_segment_;
};

/// Rejection-samples a context whose whitened distance from center is at
/// most radius and which satisfies the constraints. whitening maps
/// coordinate vectors to the space in which the ball is round (identity for
/// a Euclidean metric). Returns nothing when max_tries proposals all fail.
std::optional<Context> sample_ball_feasible(const Context& center, double radius,
                                            const Eigen::MatrixXd& whitening,
                                            const Eigen::MatrixXd& unwhitening,
                                            const FeasibilityChecker& checker, int max_tries,
                                            RngStream& rng);

/// Per-axis ridge least squares fit of kernel coordinates to position
/// waypoints (time, position-per-axis). Needs at least K-3 waypoints.
Context fit_waypoints(const std::vector<double>& times, const Eigen::MatrixXd& positions,
                      const Eigen::VectorXd& start_positions, const KernelBasis& basis,
                      double ridge);

/// Cached factorization of the waypoint design matrix, shared across axes
/// and reused for many fits against the same time sampling.
class WaypointFitter {
public:
  WaypointFitter(const KernelBasis& basis, std::vector<double> times, double ridge);

  /// positions is |times| x axes (absolute); the start offset is removed per
  /// axis before solving.
  Context fit(const Eigen::MatrixXd& positions, const Eigen::VectorXd& start_positions) const;

  const std::vector<double>& times() const { return times_; }

private:
  std::vector<double> times_;
  Eigen::MatrixXd design_;  // |times| x (K-3)
  Eigen::LDLT<Eigen::MatrixXd> normal_;
  double ridge_;
  int per_axis_;
};

/// Serializes a trajectory as CSV with columns t, axis, position, velocity,
/// acceleration.
std::string trajectory_csv(const Context& context, const KernelBasis& basis,
                           const std::vector<double>& times);

std::string to_config(const KnotGrid& grid);
KnotGrid grid_from_config(const std::string& text);
std::string to_config(const TrajectoryConstraints& constraints);
TrajectoryConstraints constraints_from_config(const std::string& text);

}  // namespace trajcurr::lti

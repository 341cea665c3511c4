#include "trajcurr/lti.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "trajcurr/config.hpp"
#include "trajcurr/numio.hpp"

namespace trajcurr::lti {

KnotGrid KnotGrid::uniform(double t_start, double t_end, int segments) {
  KnotGrid grid;
  grid.knots.resize(segments + 1);
  for (int k = 0; k <= segments; ++k)
    grid.knots[k] = t_start + (t_end - t_start) * static_cast<double>(k) / segments;
  grid.knots.back() = t_end;
  validate(grid);
  return grid;
}

KnotGrid KnotGrid::preset_eight(int segments) {
  return uniform(1.0, 11.0, segments);
}

void validate(const KnotGrid& grid) {
  if (grid.segments() < 4)
    throw std::invalid_argument("grid needs at least 4 segments, got " +
                                std::to_string(grid.segments()));
  for (std::size_t i = 1; i < grid.knots.size(); ++i)
    if (!(grid.knots[i] > grid.knots[i - 1]))
      throw std::invalid_argument("grid knots must be strictly increasing");
}

void validate(const Context& context, const KernelBasis& basis) {
  if (context.axes < 1 || context.axes > 3)
    throw std::invalid_argument("context axes must be 1, 2 or 3");
  if (context.start_positions.size() != context.axes)
    throw std::invalid_argument("context start_positions size mismatch");
  if (context.coords.size() != static_cast<Eigen::Index>(context.axes) * basis.coords_per_axis())
    throw std::invalid_argument("context coords length does not match axes * (K-3)");
}

double TrajectoryConstraints::position_violation(const Eigen::VectorXd& p) const {
  if (region == Region::Ball) {
    return std::max(0.0, (p - center).norm() - radius);
  }
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    worst = std::max(worst, std::abs(p[i] - center[i]) - half_size[i]);
  return std::max(0.0, worst);
}

Eigen::Matrix3d transition_matrix(double dt) {
  Eigen::Matrix3d m;
  m << 1.0, dt, 0.5 * dt * dt,  //
      0.0, 1.0, dt,             //
      0.0, 0.0, 1.0;
  return m;
}

Eigen::Vector3d jerk_segment_response(double t_lo, double t_hi, double t) {
  if (t_lo > t_hi) throw std::invalid_argument("jerk segment with t_lo > t_hi");
  if (t <= t_lo) return Eigen::Vector3d::Zero();
  double hi = std::min(t_hi, t);
  // Antiderivative of [ (t-tau)^2/2, t-tau, 1 ] evaluated between t_lo and hi.
  double a = t - t_lo;
  double b = t - hi;
  return {(a * a * a - b * b * b) / 6.0, (a * a - b * b) / 2.0, hi - t_lo};
}

Eigen::MatrixXd jerk_response_matrix(double t, const KnotGrid& grid) {
  if (t < grid.t_start() || t > grid.t_end())
    throw std::invalid_argument("evaluation time outside grid");
  const int K = grid.segments();
  Eigen::MatrixXd m(3, K);
  for (int k = 0; k < K; ++k) m.col(k) = jerk_segment_response(grid.knots[k], grid.knots[k + 1], t);
  return m;
}

KernelBasis kernel_basis(const KnotGrid& grid) {
  validate(grid);
  const int K = grid.segments();
  Eigen::MatrixXd end_response = jerk_response_matrix(grid.t_end(), grid);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(end_response, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  double threshold = 1e-10 * sigma(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) >= threshold) ++rank;

  Eigen::MatrixXd basis = svd.matrixV().rightCols(K - rank);
  // Fix column signs: first entry of noticeable magnitude made positive.
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
      if (std::abs(basis(r, c)) > 1e-14) {
        if (basis(r, c) < 0.0) basis.col(c) = -basis.col(c);
        break;
      }
    }
  }
  return KernelBasis{grid, std::move(basis)};
}

std::vector<std::vector<AxisState>> rollout(const Context& context, const KernelBasis& basis,
                                            const std::vector<double>& times) {
  validate(context, basis);
  const int per_axis = basis.coords_per_axis();

  // Per-axis jerk sequences.
  Eigen::MatrixXd jerks(basis.basis.rows(), context.axes);
  for (int a = 0; a < context.axes; ++a)
    jerks.col(a) = basis.basis * context.axis_coords(a, per_axis);

  std::vector<std::vector<AxisState>> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    Eigen::MatrixXd response = jerk_response_matrix(times[i], basis.grid);
    out[i].resize(context.axes);
    for (int a = 0; a < context.axes; ++a) {
      // Start state is [p0, 0, 0], so the transition contributes p0 only.
      Eigen::Vector3d state = response * jerks.col(a);
      out[i][a] = AxisState{state(0) + context.start_positions(a), state(1), state(2)};
    }
  }
  return out;
}

std::vector<std::vector<AxisState>> rollout_clamped(const Context& context,
                                                    const KernelBasis& basis,
                                                    const std::vector<double>& times) {
  std::vector<double> clamped(times);
  for (auto& t : clamped) t = std::clamp(t, basis.grid.t_start(), basis.grid.t_end());
  return rollout(context, basis, clamped);
}

std::vector<double> constraint_sample_times(const KnotGrid& grid, int samples_per_segment) {
  std::vector<double> times;
  const int K = grid.segments();
  times.reserve(static_cast<std::size_t>(K) * samples_per_segment + 1);
  for (int k = 0; k < K; ++k) {
    double lo = grid.knots[k];
    double hi = grid.knots[k + 1];
    for (int s = 0; s < samples_per_segment; ++s)
      times.push_back(lo + (hi - lo) * static_cast<double>(s) / samples_per_segment);
  }
  times.push_back(grid.t_end());
  return times;
}

FeasibilityReport check_constraints(const Context& context, const KernelBasis& basis,
                                    const TrajectoryConstraints& constraints,
                                    const std::vector<double>& sample_times,
                                    int samples_per_segment) {
  validate(context, basis);
  FeasibilityReport report;
  report.samples_per_segment = samples_per_segment;

  auto states = rollout(context, basis, sample_times);
  for (const auto& per_axis : states) {
    Eigen::VectorXd p(context.axes);
    for (int a = 0; a < context.axes; ++a) p(a) = per_axis[a].position;
    report.max_position_violation =
        std::max(report.max_position_violation, constraints.position_violation(p));
  }

  const int per_axis = basis.coords_per_axis();
  Eigen::MatrixXd jerks(basis.basis.rows(), context.axes);
  for (int a = 0; a < context.axes; ++a)
    jerks.col(a) = basis.basis * context.axis_coords(a, per_axis);
  for (Eigen::Index k = 0; k < jerks.rows(); ++k) {
    double norm = jerks.row(k).norm();
    report.max_jerk_violation =
        std::max(report.max_jerk_violation, norm - constraints.jerk_bound);
  }
  report.max_jerk_violation = std::max(0.0, report.max_jerk_violation);

  report.feasible = report.max_position_violation == 0.0 && report.max_jerk_violation == 0.0;
  return report;
}

FeasibilityReport check_constraints(const Context& context, const KernelBasis& basis,
                                    const TrajectoryConstraints& constraints) {
  return check_constraints(context, basis, constraints, constraint_sample_times(basis.grid), 4);
}

FeasibilityChecker::FeasibilityChecker(const KernelBasis& basis,
                                       TrajectoryConstraints constraints,
                                       int samples_per_segment)
    : constraints_(std::move(constraints)),
      times_(constraint_sample_times(basis.grid, samples_per_segment)),
      jerk_map_(basis.basis),
      samples_per_segment_(samples_per_segment) {
  position_response_.resize(static_cast<Eigen::Index>(times_.size()), basis.coords_per_axis());
  for (std::size_t i = 0; i < times_.size(); ++i)
    position_response_.row(static_cast<Eigen::Index>(i)) =
        jerk_response_matrix(times_[i], basis.grid).row(0) * basis.basis;
}

FeasibilityReport FeasibilityChecker::check(const Context& context) const {
  FeasibilityReport report;
  report.samples_per_segment = samples_per_segment_;
  const int per_axis = static_cast<int>(position_response_.cols());

  Eigen::MatrixXd positions(position_response_.rows(), context.axes);
  for (int a = 0; a < context.axes; ++a)
    positions.col(a) = position_response_ * context.axis_coords(a, per_axis);
  positions.rowwise() += context.start_positions.transpose();
  for (Eigen::Index i = 0; i < positions.rows(); ++i)
    report.max_position_violation = std::max(
        report.max_position_violation,
        constraints_.position_violation(positions.row(i).transpose()));

  Eigen::MatrixXd jerks(jerk_map_.rows(), context.axes);
  for (int a = 0; a < context.axes; ++a)
    jerks.col(a) = jerk_map_ * context.axis_coords(a, per_axis);
  for (Eigen::Index k = 0; k < jerks.rows(); ++k)
    report.max_jerk_violation =
        std::max(report.max_jerk_violation, jerks.row(k).norm() - constraints_.jerk_bound);
  report.max_jerk_violation = std::max(0.0, report.max_jerk_violation);

  report.feasible = report.max_position_violation == 0.0 && report.max_jerk_violation == 0.0;
  return report;
}

std::optional<Context> sample_ball_feasible(const Context& center, double radius,
                                            const Eigen::MatrixXd& whitening,
                                            const Eigen::MatrixXd& unwhitening,
                                            const FeasibilityChecker& checker, int max_tries,
                                            RngStream& rng) {
  if (radius == 0.0) return center;
  const Eigen::Index dim = center.coords.size();
  Eigen::VectorXd white_center = whitening * center.coords;
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    Eigen::VectorXd dir(dim);
    for (Eigen::Index i = 0; i < dim; ++i) dir(i) = rng.gaussian();
    double norm = dir.norm();
    if (norm == 0.0) continue;
    double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    Context proposal = center;
    proposal.coords = unwhitening * (white_center + (r / norm) * dir);
    if (checker.feasible(proposal)) return proposal;
  }
  return std::nullopt;
}

namespace {

Eigen::MatrixXd position_design(const KernelBasis& basis, const std::vector<double>& times) {
  Eigen::MatrixXd design(static_cast<Eigen::Index>(times.size()), basis.coords_per_axis());
  for (std::size_t i = 0; i < times.size(); ++i)
    design.row(static_cast<Eigen::Index>(i)) =
        jerk_response_matrix(times[i], basis.grid).row(0) * basis.basis;
  return design;
}

}  // namespace

Context fit_waypoints(const std::vector<double>& times, const Eigen::MatrixXd& positions,
                      const Eigen::VectorXd& start_positions, const KernelBasis& basis,
                      double ridge) {
  WaypointFitter fitter(basis, times, ridge);
  return fitter.fit(positions, start_positions);
}

WaypointFitter::WaypointFitter(const KernelBasis& basis, std::vector<double> times,
                               double ridge)
    : times_(std::move(times)), ridge_(ridge), per_axis_(basis.coords_per_axis()) {
  if (static_cast<int>(times_.size()) < per_axis_)
    throw std::invalid_argument("need at least K-3 waypoints per axis");
  design_ = position_design(basis, times_);
  if (ridge_ == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
    if (qr.rank() < per_axis_)
      throw std::invalid_argument("waypoint design matrix is rank deficient; use ridge > 0");
  }
  Eigen::MatrixXd normal = design_.transpose() * design_;
  normal.diagonal().array() += ridge_;
  normal_.compute(normal);
}

Context WaypointFitter::fit(const Eigen::MatrixXd& positions,
                            const Eigen::VectorXd& start_positions) const {
  if (positions.rows() != static_cast<Eigen::Index>(times_.size()))
    throw std::invalid_argument("waypoint row count does not match fitter times");
  const int axes = static_cast<int>(positions.cols());
  if (start_positions.size() != axes)
    throw std::invalid_argument("start_positions size does not match waypoint axes");

  Context context;
  context.axes = axes;
  context.start_positions = start_positions;
  context.coords.resize(static_cast<Eigen::Index>(axes) * per_axis_);
  for (int a = 0; a < axes; ++a) {
    Eigen::VectorXd rhs = positions.col(a).array() - start_positions(a);
    context.coords.segment(static_cast<Eigen::Index>(a) * per_axis_, per_axis_) =
        normal_.solve(design_.transpose() * rhs);
  }
  return context;
}

std::string trajectory_csv(const Context& context, const KernelBasis& basis,
                           const std::vector<double>& times) {
  auto states = rollout_clamped(context, basis, times);
  std::string out = "t,axis,position,velocity,acceleration\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (int a = 0; a < context.axes; ++a) {
      out += format_double(times[i]);
      out += ",";
      out += std::to_string(a);
      out += ",";
      out += format_double(states[i][a].position);
      out += ",";
      out += format_double(states[i][a].velocity);
      out += ",";
      out += format_double(states[i][a].acceleration);
      out += "\n";
    }
  }
  return out;
}

std::string to_config(const KnotGrid& grid) {
  KeyValueConfig cfg;
  cfg.set("grid.knots", grid.knots);
  return cfg.serialize();
}

KnotGrid grid_from_config(const std::string& text) {
  auto cfg = KeyValueConfig::parse(text);
  KnotGrid grid{cfg.get_doubles("grid.knots")};
  validate(grid);
  return grid;
}

std::string to_config(const TrajectoryConstraints& constraints) {
  KeyValueConfig cfg;
  cfg.set("constraints.region",
          constraints.region == TrajectoryConstraints::Region::Box ? "box" : "ball");
  std::vector<double> center(constraints.center.data(),
                             constraints.center.data() + constraints.center.size());
  cfg.set("constraints.center", center);
  if (constraints.region == TrajectoryConstraints::Region::Box) {
    std::vector<double> half(constraints.half_size.data(),
                             constraints.half_size.data() + constraints.half_size.size());
    cfg.set("constraints.half_size", half);
  } else {
    cfg.set("constraints.radius", constraints.radius);
  }
  cfg.set("constraints.jerk_bound", constraints.jerk_bound);
  return cfg.serialize();
}

TrajectoryConstraints constraints_from_config(const std::string& text) {
  auto cfg = KeyValueConfig::parse(text);
  TrajectoryConstraints constraints;
  auto region = cfg.get("constraints.region");
  if (region == "box")
    constraints.region = TrajectoryConstraints::Region::Box;
  else if (region == "ball")
    constraints.region = TrajectoryConstraints::Region::Ball;
  else
    throw std::invalid_argument("unknown constraint region: " + region);
  auto center = cfg.get_doubles("constraints.center");
  constraints.center = Eigen::Map<Eigen::VectorXd>(center.data(), center.size());
  if (constraints.region == TrajectoryConstraints::Region::Box) {
    auto half = cfg.get_doubles("constraints.half_size");
    constraints.half_size = Eigen::Map<Eigen::VectorXd>(half.data(), half.size());
  } else {
    constraints.radius = cfg.get_double("constraints.radius");
  }
  constraints.jerk_bound = cfg.get_double("constraints.jerk_bound");
  if (constraints.jerk_bound <= 0.0)
    throw std::invalid_argument("jerk bound must be positive");
  return constraints;
}

}  // namespace trajcurr::lti

#include "trajcurr/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace trajcurr::oracles {

Eigen::Vector3d simpson_segment_response(double t_lo, double t_hi, double t, int panels) {
  if (t_lo > t_hi) throw std::invalid_argument("segment with t_lo > t_hi");
  double hi = std::min(t_hi, t);
  if (hi <= t_lo) return Eigen::Vector3d::Zero();

  auto integrand = [t](double tau) {
    double dt = t - tau;
    return Eigen::Vector3d(0.5 * dt * dt, dt, 1.0);
  };

  double h = (hi - t_lo) / (2 * panels);
  Eigen::Vector3d sum = integrand(t_lo) + integrand(hi);
  for (int i = 1; i < 2 * panels; ++i)
    sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(t_lo + i * h);
  return (h / 3.0) * sum;
}

Eigen::Matrix3d rk4_transition(double dt, int steps) {
  Eigen::Matrix3d a;
  a << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  double h = dt / steps;
  for (int i = 0; i < steps; ++i) {
    Eigen::Matrix3d k1 = a * m;
    Eigen::Matrix3d k2 = a * (m + 0.5 * h * k1);
    Eigen::Matrix3d k3 = a * (m + 0.5 * h * k2);
    Eigen::Matrix3d k4 = a * (m + h * k3);
    m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return m;
}

Eigen::Vector3d propagate_piecewise(const std::vector<double>& knots,
                                    const Eigen::VectorXd& jerks, const Eigen::Vector3d& start,
                                    double t) {
  if (jerks.size() != static_cast<Eigen::Index>(knots.size()) - 1)
    throw std::invalid_argument("jerk count does not match segment count");

  auto advance = [](const Eigen::Vector3d& s, double jerk, double dt) {
    Eigen::Vector3d next;
    next(2) = s(2) + jerk * dt;
    next(1) = s(1) + s(2) * dt + 0.5 * jerk * dt * dt;
    next(0) = s(0) + s(1) * dt + 0.5 * s(2) * dt * dt + jerk * dt * dt * dt / 6.0;
    return next;
  };

  Eigen::Vector3d state = start;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    if (t <= knots[k]) break;
    double dt = std::min(t, knots[k + 1]) - knots[k];
    state = advance(state, jerks(static_cast<Eigen::Index>(k)), dt);
    if (t <= knots[k + 1]) break;
  }
  return state;
}

double kernel_residual(const lti::KernelBasis& basis) {
  Eigen::MatrixXd end_response = lti::jerk_response_matrix(basis.grid.t_end(), basis.grid);
  return (end_response * basis.basis).cwiseAbs().maxCoeff();
}

}  // namespace trajcurr::oracles

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "trajcurr/lti.hpp"

namespace trajcurr::oracles {

/// Composite-Simpson integral of the unit-jerk state response over
/// [t_lo, min(t_hi, t)] (zero when the segment has not started). Independent
/// of the closed form it is used to check.
Eigen::Vector3d simpson_segment_response(double t_lo, double t_hi, double t, int panels = 64);

/// RK4 integration of the state transition from the identity over [0, dt].
Eigen::Matrix3d rk4_transition(double dt, int steps = 512);

/// Step-wise propagation of the triple integrator under piece-wise constant
/// jerks: exact per-segment updates chained across segments, evaluated at t.
/// start is the (position, velocity, acceleration) at the first knot.
Eigen::Vector3d propagate_piecewise(const std::vector<double>& knots,
                                    const Eigen::VectorXd& jerks, const Eigen::Vector3d& start,
                                    double t);

/// max |end-time response * basis| over all entries.
double kernel_residual(const lti::KernelBasis& basis);

}  // namespace trajcurr::oracles

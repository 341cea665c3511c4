#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "trajcurr/lti.hpp"

namespace trajcurr::metric {

/// Distance over context vectors. A Mahalanobis metric carries its matrix
/// plus a cached whitening transform W with W^T W equal to the (floored)
/// matrix, so all geometry can run in whitened coordinates.
struct MetricSpec {
  enum class Kind { Euclidean, Mahalanobis };

  Kind kind = Kind::Euclidean;
  Eigen::MatrixXd mahalanobis;  // D x D, symmetric PSD; empty for Euclidean
  Eigen::MatrixXd whitening;    // W
  Eigen::MatrixXd unwhitening;  // W^{-1} on the floored spectrum

  static MetricSpec euclidean() { return MetricSpec{}; }
  static MetricSpec mahalanobis_from(const Eigen::MatrixXd& matrix, double floor = 1e-8);

  bool is_euclidean() const { return kind == Kind::Euclidean; }

  Eigen::VectorXd whiten(const Eigen::VectorXd& c) const {
    return is_euclidean() ? c : Eigen::VectorXd(whitening * c);
  }
  Eigen::VectorXd unwhiten(const Eigen::VectorXd& w) const {
    return is_euclidean() ? w : Eigen::VectorXd(unwhitening * w);
  }
  /// Rows are contexts.
  Eigen::MatrixXd whiten_rows(const Eigen::MatrixXd& rows) const {
    return is_euclidean() ? rows : Eigen::MatrixXd(rows * whitening.transpose());
  }
};

/// Which state rows enter the trajectory metric.
enum class StateRows { Full, PositionOnly };

/// Recipe for the trajectory-aware metric: stack the per-axis state
/// responses at eval_times, optionally append jerk-identity rows scaled by
/// jerk_regularization.
struct MetricBuildSpec {
  std::vector<double> eval_times;
  double jerk_regularization = 0.0;
  int axes = 3;
  StateRows rows = StateRows::Full;

  /// Knots plus segment midpoints.
  static std::vector<double> default_eval_times(const lti::KnotGrid& grid);
};

/// Mahalanobis matrix measuring state differences of the trajectories two
/// coordinate vectors generate, block-diagonal across axes.
Eigen::MatrixXd build_state_metric(const MetricBuildSpec& spec, const lti::KernelBasis& basis);

/// Eigendecomposition-based whitening; eigenvalues below floor * lambda_max
/// are raised to the floor so W stays invertible.
Eigen::MatrixXd whitening_transform(const Eigen::MatrixXd& matrix, double floor);

double distance(const MetricSpec& metric, const Eigen::VectorXd& c1, const Eigen::VectorXd& c2);

/// Pairwise squared distances between row sets, via one whitening pass and a
/// Gram product.
Eigen::MatrixXd squared_distance_matrix(const MetricSpec& metric, const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b);

std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(const std::string& text);
void save_matrix_binary(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd load_matrix_binary(const std::string& path);

}  // namespace trajcurr::metric

#include "trajcurr/metric.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "trajcurr/numio.hpp"

namespace trajcurr::metric {

MetricSpec MetricSpec::mahalanobis_from(const Eigen::MatrixXd& matrix, double floor) {
  if (matrix.rows() != matrix.cols())
    throw std::invalid_argument("Mahalanobis matrix must be square");
  double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale)
    throw std::invalid_argument("Mahalanobis matrix must be symmetric");

  MetricSpec spec;
  spec.kind = Kind::Mahalanobis;
  spec.mahalanobis = matrix;

  // W = L^{1/2} V^T on the floored spectrum, so W^{-1} = V L^{-1/2}.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (matrix + matrix.transpose()));
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.maxCoeff() <= 0.0)
    throw std::invalid_argument("Mahalanobis matrix has no positive eigenvalue");
  double min_value = std::max(0.0, floor * values.maxCoeff());
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = std::max(values(i), min_value);
  Eigen::VectorXd roots = values.cwiseSqrt();
  spec.whitening = roots.asDiagonal() * eig.eigenvectors().transpose();
  spec.unwhitening = eig.eigenvectors() * roots.cwiseInverse().asDiagonal();
  return spec;
}

std::vector<double> MetricBuildSpec::default_eval_times(const lti::KnotGrid& grid) {
  std::vector<double> times;
  times.reserve(grid.knots.size() * 2 - 1);
  for (std::size_t k = 0; k + 1 < grid.knots.size(); ++k) {
    times.push_back(grid.knots[k]);
    times.push_back(0.5 * (grid.knots[k] + grid.knots[k + 1]));
  }
  times.push_back(grid.t_end());
  return times;
}

Eigen::MatrixXd build_state_metric(const MetricBuildSpec& spec, const lti::KernelBasis& basis) {
  if (spec.eval_times.empty()) throw std::invalid_argument("metric needs eval times");
  if (spec.axes < 1 || spec.axes > 3) throw std::invalid_argument("metric axes must be 1..3");

  const int per_axis = basis.coords_per_axis();
  // The metric is block diagonal with identical per-axis blocks, so one
  // block is accumulated and repeated.
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(per_axis, per_axis);
  for (double t : spec.eval_times) {
    Eigen::MatrixXd response = lti::jerk_response_matrix(t, basis.grid);
    if (spec.rows == StateRows::PositionOnly) response = response.topRows(1).eval();
    Eigen::MatrixXd mapped = response * basis.basis;
    block.noalias() += mapped.transpose() * mapped;
  }

  const Eigen::Index dim = static_cast<Eigen::Index>(spec.axes) * per_axis;
  Eigen::MatrixXd metric = Eigen::MatrixXd::Zero(dim, dim);
  for (int a = 0; a < spec.axes; ++a)
    metric.block(a * per_axis, a * per_axis, per_axis, per_axis) = block;

  if (spec.jerk_regularization > 0.0) {
    // Appending scaled jerk-map rows adds lambda^2 * I on an orthonormal
    // basis.
    double lambda = spec.jerk_regularization;
    metric.diagonal().array() += lambda * lambda;
  }
  return metric;
}

Eigen::MatrixXd whitening_transform(const Eigen::MatrixXd& matrix, double floor) {
  if (matrix.rows() != matrix.cols())
    throw std::invalid_argument("whitening needs a square matrix");
  double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale)
    throw std::invalid_argument("whitening needs a symmetric matrix");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (matrix + matrix.transpose()));
  Eigen::VectorXd values = eig.eigenvalues();
  double lambda_max = values.maxCoeff();
  double min_value = std::max(0.0, floor * lambda_max);
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = std::max(values(i), min_value);
  return values.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

double distance(const MetricSpec& metric, const Eigen::VectorXd& c1, const Eigen::VectorXd& c2) {
  if (c1.size() != c2.size()) throw std::invalid_argument("context dimension mismatch");
  if (metric.is_euclidean()) return (c1 - c2).norm();
  if (metric.whitening.cols() != c1.size())
    throw std::invalid_argument("context dimension does not match metric");
  return (metric.whitening * (c1 - c2)).norm();
}

Eigen::MatrixXd squared_distance_matrix(const MetricSpec& metric, const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("context dimension mismatch");
  Eigen::MatrixXd wa = metric.whiten_rows(a);
  Eigen::MatrixXd wb = metric.whiten_rows(b);
  Eigen::VectorXd na = wa.rowwise().squaredNorm();
  Eigen::VectorXd nb = wb.rowwise().squaredNorm();
  Eigen::MatrixXd cost = -2.0 * wa * wb.transpose();
  cost.colwise() += na;
  cost.rowwise() += nb.transpose();
  return cost.cwiseMax(0.0);
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ",";
      out += format_double(m(r, c));
    }
    out += "\n";
  }
  return out;
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(parse_double(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("ragged CSV matrix");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

void save_matrix_binary(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  std::int64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd load_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::int64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  Eigen::MatrixXd m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw std::runtime_error("truncated matrix file: " + path);
  return m;
}

}  // namespace trajcurr::metric

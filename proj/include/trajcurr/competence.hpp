#pragma once

#include <Eigen/Dense>
#include <deque>
#include <string>
#include <vector>

#include "trajcurr/metric.hpp"

namespace trajcurr::competence {

/// One environment evaluation: the task, the success metric M (e.g. steps
/// survived), the episodic return J, and the raw step count.
struct RolloutRecord {
  Eigen::VectorXd context;
  double metric_value = 0.0;
  double episode_return = 0.0;
  long steps = 0;
};

/// Success and recency buffers. Records with metric_value >= delta at
/// insertion time also land in the success buffer, which preserves positive
/// evidence near the frontier after the recent buffer has cycled past it.
class PerformanceBuffer {
public:
  PerformanceBuffer(std::size_t success_capacity, std::size_t recent_capacity, double delta)
      : success_capacity_(success_capacity), recent_capacity_(recent_capacity), delta_(delta) {}

  void insert(const RolloutRecord& record);
  void insert(const std::vector<RolloutRecord>& records);

  bool empty() const { return success_.empty() && recent_.empty(); }
  std::size_t size() const { return success_.size() + recent_.size(); }
  double delta() const { return delta_; }

  const std::deque<RolloutRecord>& success_records() const { return success_; }
  const std::deque<RolloutRecord>& recent_records() const { return recent_; }

  /// All records, success buffer first, each oldest to newest.
  std::vector<const RolloutRecord*> all_records() const;

  std::string to_jsonl() const;
  static PerformanceBuffer from_jsonl(const std::string& text, std::size_t success_capacity,
                                      std::size_t recent_capacity, double delta);

private:
  std::deque<RolloutRecord> success_;
  std::deque<RolloutRecord> recent_;
  std::size_t success_capacity_;
  std::size_t recent_capacity_;
  double delta_;
};

bool success_indicator(const RolloutRecord& record, double delta);

/// Gaussian-kernel regressor with bandwidth h over the buffer contents.
struct Regressor {
  double bandwidth = 1.0;
  metric::MetricSpec metric;
};

/// Immutable view for prediction: contexts pre-whitened into a matrix so
/// many predictions can run concurrently against one snapshot.
struct RegressionSnapshot {
  Eigen::MatrixXd whitened_contexts;  // L x D
  Eigen::VectorXd values;             // L

  bool empty() const { return values.size() == 0; }
};

RegressionSnapshot snapshot(const PerformanceBuffer& buffer, const metric::MetricSpec& metric);

/// Kernel-weighted mean of buffered metric values at the whitened query.
/// When every weight underflows, falls back to the nearest record's value.
double predict_whitened(const Regressor& reg, const RegressionSnapshot& snap,
                        const Eigen::VectorXd& whitened_query);

/// Batched variant; rows of whitened_queries are query points.
Eigen::VectorXd predict_whitened(const Regressor& reg, const RegressionSnapshot& snap,
                                 const Eigen::MatrixXd& whitened_queries);

/// Convenience single-call form over raw contexts.
double predict(const Regressor& reg, const PerformanceBuffer& buffer,
               const Eigen::VectorXd& context);

}  // namespace trajcurr::competence

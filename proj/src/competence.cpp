#include "trajcurr/competence.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace trajcurr::competence {

void PerformanceBuffer::insert(const RolloutRecord& record) {
  recent_.push_back(record);
  if (recent_.size() > recent_capacity_) recent_.pop_front();
  if (record.metric_value >= delta_) {
    success_.push_back(record);
    if (success_.size() > success_capacity_) success_.pop_front();
  }
}

void PerformanceBuffer::insert(const std::vector<RolloutRecord>& records) {
  for (const auto& r : records) insert(r);
}

std::vector<const RolloutRecord*> PerformanceBuffer::all_records() const {
  std::vector<const RolloutRecord*> out;
  out.reserve(size());
  for (const auto& r : success_) out.push_back(&r);
  for (const auto& r : recent_) out.push_back(&r);
  return out;
}

bool success_indicator(const RolloutRecord& record, double delta) {
  return record.metric_value >= delta;
}

std::string PerformanceBuffer::to_jsonl() const {
  std::string out;
  auto dump = [&out](const RolloutRecord& r, const char* tag) {
    nlohmann::json j;
    j["buffer"] = tag;
    j["context"] = std::vector<double>(r.context.data(), r.context.data() + r.context.size());
    j["metric_value"] = r.metric_value;
    j["episode_return"] = r.episode_return;
    j["steps"] = r.steps;
    out += j.dump();
    out += "\n";
  };
  for (const auto& r : success_) dump(r, "success");
  for (const auto& r : recent_) dump(r, "recent");
  return out;
}

PerformanceBuffer PerformanceBuffer::from_jsonl(const std::string& text,
                                                std::size_t success_capacity,
                                                std::size_t recent_capacity, double delta) {
  PerformanceBuffer buffer(success_capacity, recent_capacity, delta);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    RolloutRecord r;
    auto coords = j.at("context").get<std::vector<double>>();
    r.context = Eigen::Map<Eigen::VectorXd>(coords.data(), coords.size());
    r.metric_value = j.at("metric_value").get<double>();
    r.episode_return = j.at("episode_return").get<double>();
    r.steps = j.at("steps").get<long>();
    auto tag = j.at("buffer").get<std::string>();
    if (tag == "success") {
      buffer.success_.push_back(std::move(r));
      if (buffer.success_.size() > success_capacity) buffer.success_.pop_front();
    } else {
      buffer.recent_.push_back(std::move(r));
      if (buffer.recent_.size() > recent_capacity) buffer.recent_.pop_front();
    }
  }
  return buffer;
}

RegressionSnapshot snapshot(const PerformanceBuffer& buffer, const metric::MetricSpec& metric) {
  auto records = buffer.all_records();
  RegressionSnapshot snap;
  if (records.empty()) return snap;
  Eigen::MatrixXd contexts(static_cast<Eigen::Index>(records.size()),
                           records.front()->context.size());
  snap.values.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    contexts.row(static_cast<Eigen::Index>(i)) = records[i]->context.transpose();
    snap.values(static_cast<Eigen::Index>(i)) = records[i]->metric_value;
  }
  snap.whitened_contexts = metric.whiten_rows(contexts);
  return snap;
}

double predict_whitened(const Regressor& reg, const RegressionSnapshot& snap,
                        const Eigen::VectorXd& whitened_query) {
  if (snap.empty()) throw std::invalid_argument("prediction from an empty buffer");
  Eigen::VectorXd sq =
      (snap.whitened_contexts.rowwise() - whitened_query.transpose()).rowwise().squaredNorm();
  Eigen::ArrayXd weights = (-sq.array() / (2.0 * reg.bandwidth * reg.bandwidth)).exp();
  double total = weights.sum();
  if (!(total > 1e-300)) {
    Eigen::Index nearest = 0;
    sq.minCoeff(&nearest);
    return snap.values(nearest);
  }
  return (weights * snap.values.array()).sum() / total;
}

Eigen::VectorXd predict_whitened(const Regressor& reg, const RegressionSnapshot& snap,
                                 const Eigen::MatrixXd& whitened_queries) {
  if (snap.empty()) throw std::invalid_argument("prediction from an empty buffer");
  const Eigen::Index q = whitened_queries.rows();
  Eigen::VectorXd out(q);

  // ||a-b||^2 via a Gram product; rows of sq are queries.
  Eigen::VectorXd record_norms = snap.whitened_contexts.rowwise().squaredNorm();
  Eigen::VectorXd query_norms = whitened_queries.rowwise().squaredNorm();
  Eigen::MatrixXd sq = -2.0 * whitened_queries * snap.whitened_contexts.transpose();
  sq.colwise() += query_norms;
  sq.rowwise() += record_norms.transpose();
  sq = sq.cwiseMax(0.0);

  const double inv = 1.0 / (2.0 * reg.bandwidth * reg.bandwidth);
  for (Eigen::Index i = 0; i < q; ++i) {
    Eigen::ArrayXd weights = (-sq.row(i).transpose().array() * inv).exp();
    double total = weights.sum();
    if (!(total > 1e-300)) {
      Eigen::Index nearest = 0;
      sq.row(i).minCoeff(&nearest);
      out(i) = snap.values(nearest);
    } else {
      out(i) = (weights * snap.values.array()).sum() / total;
    }
  }
  return out;
}

double predict(const Regressor& reg, const PerformanceBuffer& buffer,
               const Eigen::VectorXd& context) {
  auto snap = snapshot(buffer, reg.metric);
  return predict_whitened(reg, snap, reg.metric.whiten(context));
}

}  // namespace trajcurr::competence

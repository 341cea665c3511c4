#include "trajcurr/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace trajcurr::transport {

void validate_cost_matrix(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("cost matrix must be square");
  if (cost.size() == 0) throw std::invalid_argument("cost matrix must be nonempty");
  if (!cost.allFinite()) throw std::invalid_argument("cost matrix must be finite");
  if (cost.minCoeff() < 0.0) throw std::invalid_argument("cost matrix must be nonnegative");
}

AuctionConfig AuctionConfig::resolved(const Eigen::MatrixXd& cost) const {
  if (!(eps_scale > 0.0) || !(eps_scale < 1.0))
    throw std::invalid_argument("auction eps_scale must lie in (0, 1)");
  AuctionConfig r = *this;
  const auto n = cost.rows();
  double lo = cost.minCoeff();
  double hi = cost.maxCoeff();

  if (r.eps_min <= 0.0) {
    // Smallest nonzero gap between cost values, scaled down by N+1; the
    // floor keeps degenerate matrices from demanding impossible precision.
    std::vector<double> values(cost.data(), cost.data() + cost.size());
    std::sort(values.begin(), values.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < values.size(); ++i) {
      double d = values[i] - values[i - 1];
      if (d > 0.0) gap = std::min(gap, d);
    }
    if (!std::isfinite(gap)) gap = 1.0;
    r.eps_min = std::max(1e-9, gap / static_cast<double>(n + 1));
  }
  if (r.eps_start <= 0.0) r.eps_start = std::max((hi - lo) / 4.0, r.eps_min);
  if (r.eps_start < r.eps_min) r.eps_start = r.eps_min;
  if (r.max_rounds <= 0) r.max_rounds = 10000L * static_cast<long>(n);
  return r;
}

Assignment auction_assign(const Eigen::MatrixXd& cost, const AuctionConfig& config,
                          AuctionStats* stats) {
  validate_cost_matrix(cost);
  const int n = static_cast<int>(cost.rows());
  AuctionConfig cfg = config.resolved(cost);

  std::vector<double> prices(n, 0.0);
  std::vector<int> owner(n, -1);  // item -> person
  std::vector<int> item_of(n, -1);
  long rounds = 0;
  int levels = 0;
  long price_decreases = 0;

  double eps = cfg.eps_start;
  bool last_level = false;
  while (true) {
    if (eps <= cfg.eps_min) {
      eps = cfg.eps_min;
      last_level = true;
    }
    ++levels;
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(item_of.begin(), item_of.end(), -1);
    std::deque<int> unassigned(n);
    std::iota(unassigned.begin(), unassigned.end(), 0);

    while (!unassigned.empty()) {
      if (++rounds > cfg.max_rounds) {
        if (stats) {
          stats->rounds = rounds;
          stats->eps_levels = levels;
          stats->price_decreases = price_decreases;
        }
        throw AuctionRoundsExceeded(item_of, rounds);
      }
      int person = unassigned.front();
      unassigned.pop_front();

      // Best and second-best net value; ties go to the lowest item index.
      int best_item = 0;
      double best = -cost(person, 0) - prices[0];
      double second = -std::numeric_limits<double>::infinity();
      for (int j = 1; j < n; ++j) {
        double v = -cost(person, j) - prices[j];
        if (v > best) {
          second = best;
          best = v;
          best_item = j;
        } else if (v > second) {
          second = v;
        }
      }
      double bid = (n == 1) ? eps : best - second + eps;
      if (bid < 0.0) ++price_decreases;
      prices[best_item] += bid;
      int previous = owner[best_item];
      if (previous != -1) {
        item_of[previous] = -1;
        unassigned.push_back(previous);
      }
      owner[best_item] = person;
      item_of[person] = best_item;
    }

    if (last_level) break;
    eps *= cfg.eps_scale;
  }

  if (stats) {
    stats->rounds = rounds;
    stats->eps_levels = levels;
    stats->price_decreases = price_decreases;
  }

  Assignment result;
  result.phi = item_of;
  for (int i = 0; i < n; ++i) result.total_cost += cost(i, item_of[i]);
  return result;
}

Assignment brute_force_assign(const Eigen::MatrixXd& cost) {
  validate_cost_matrix(cost);
  const int n = static_cast<int>(cost.rows());
  if (n > 9) throw std::invalid_argument("brute force assignment limited to N <= 9");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best;
  best.total_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[i]);
    if (total < best.total_cost) {
      best.total_cost = total;
      best.phi = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Wasserstein2Result wasserstein2(const Eigen::MatrixXd& p_particles,
                                const Eigen::MatrixXd& mu_particles,
                                const metric::MetricSpec& metric, const AuctionConfig& config) {
  if (p_particles.rows() != mu_particles.rows())
    throw std::invalid_argument("particle sets must have equal size");
  const auto n = p_particles.rows();
  Eigen::MatrixXd wp = metric.whiten_rows(p_particles);
  Eigen::MatrixXd wm = metric.whiten_rows(mu_particles);

  Eigen::VectorXd np = wp.rowwise().squaredNorm();
  Eigen::VectorXd nm = wm.rowwise().squaredNorm();
  Eigen::MatrixXd cost = -2.0 * wp * wm.transpose();
  cost.colwise() += np;
  cost.rowwise() += nm.transpose();
  cost = cost.cwiseMax(0.0);

  Wasserstein2Result result;
  result.assignment = auction_assign(cost, config);

  // The Gram expansion above carries rounding noise; the matched cost is
  // recomputed from explicit differences so coincident pairs contribute an
  // exact zero.
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    total += (wp.row(i) - wm.row(result.assignment.phi[static_cast<int>(i)])).squaredNorm();
  result.assignment.total_cost = total;
  result.value = std::sqrt(total / static_cast<double>(n));
  return result;
}

}  // namespace trajcurr::transport

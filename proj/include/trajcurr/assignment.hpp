#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "trajcurr/metric.hpp"

namespace trajcurr::transport {

struct Assignment {
  std::vector<int> phi;  // row n is matched to column phi[n]
  double total_cost = 0.0;
};

struct AuctionConfig {
  double eps_start = 0.0;  // 0: derived from the cost range
  double eps_scale = 0.2;
  double eps_min = 0.0;  // 0: derived from the smallest nonzero cost gap
  long max_rounds = 0;   // 0: 10000 * N

  /// Fills the derived fields for a concrete cost matrix.
  AuctionConfig resolved(const Eigen::MatrixXd& cost) const;
};

struct AuctionStats {
  long rounds = 0;
  int eps_levels = 0;
  long price_decreases = 0;  // must stay 0; prices only rise within a level
};

/// Raised when the bidding budget runs out; carries what was assigned so far
/// (-1 for unassigned rows).
class AuctionRoundsExceeded : public std::runtime_error {
public:
  AuctionRoundsExceeded(std::vector<int> partial, long rounds)
      : std::runtime_error("auction exceeded max_rounds after " + std::to_string(rounds) +
                           " bids"),
        partial_phi(std::move(partial)) {}

  std::vector<int> partial_phi;
};

/// Forward auction with epsilon scaling. Minimizes the total cost of a
/// perfect matching; the result is within N * eps_min of the optimum. Ties
/// break toward the lowest column index, so the result is deterministic.
Assignment auction_assign(const Eigen::MatrixXd& cost, const AuctionConfig& config = {},
                          AuctionStats* stats = nullptr);

/// Exact optimum by enumeration; N <= 9.
Assignment brute_force_assign(const Eigen::MatrixXd& cost);

struct Wasserstein2Result {
  double value = 0.0;
  Assignment assignment;
};

/// Squared-distance optimal matching between two equally sized particle
/// sets (rows are particles); value is the root mean squared matched
/// distance.
Wasserstein2Result wasserstein2(const Eigen::MatrixXd& p_particles,
                                const Eigen::MatrixXd& mu_particles,
                                const metric::MetricSpec& metric,
                                const AuctionConfig& config = {});

/// Validates a cost matrix loaded from CSV: square, finite, nonnegative.
void validate_cost_matrix(const Eigen::MatrixXd& cost);

}  // namespace trajcurr::transport

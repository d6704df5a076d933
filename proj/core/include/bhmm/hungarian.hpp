#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bhmm {

/// Minimum-cost perfect matching on a square cost matrix.
/// Returns assignment[row] = column.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

struct MatchResult {
  double error = 0.0;
  /// permutation[h] is the estimated state matched to true state h.
  std::vector<int> permutation;
};

/// min over permutations s of sum_h |p_h - p_est_{s(h)}|.
MatchResult estimation_error(const Eigen::VectorXd& p_true, const Eigen::VectorXd& p_est);

/// Multi-cell form: columns are states, the cost of a pair sums |diff| over rows.
MatchResult estimation_error(const Eigen::MatrixXd& p_true, const Eigen::MatrixXd& p_est);

}  // namespace bhmm

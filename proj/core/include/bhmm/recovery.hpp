#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bhmm {

/// Binomial probabilities recovered from the expected feature map.
struct ProbabilityEstimate {
  Eigen::MatrixXd probs;  ///< cells x m, clamped into [0, 1]
  Eigen::MatrixXd raw;    ///< cells x m, before clamping
};

/// For every cell block and state: p = (sum_i (i / D) C(i, h) - a) / (1 - 2a),
/// i = 1..D over the block. Requires each block to sum to one (1e-6) and a < 0.5.
ProbabilityEstimate recover_p(const Eigen::MatrixXd& C, const Eigen::VectorXd& a_hat,
                              int granularity);

/// Euclidean projection onto {x >= 0, sum x = 1}, in place (sort-based).
void project_to_simplex(std::span<double> x);

struct StabilizerConfig {
  int max_iters = 5000;
  double rel_tol = 1e-9;
  bool record_trace = false;
};

struct JointEstimate {
  Eigen::MatrixXd H;  ///< H(i, j) estimates P(h2 = i, h1 = j)
  double objective = 0.0;          ///< ||P21 - C H C^T||_F^2 at H
  double initial_objective = 0.0;  ///< same at the uniform start
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  ///< objective per iteration when requested
};

/// min ||P21 - C H C^T||_F^2 over H >= 0, sum H = 1 by projected gradient
/// descent from the uniform joint. Step 1/L with L = sigma_max(C^T C)^2 on the
/// halved objective; the step is halved if an iterate fails to decrease.
JointEstimate stabilized_H21(const Eigen::MatrixXd& P21, const Eigen::MatrixXd& C,
                             const StabilizerConfig& cfg = {});

struct ChainEstimate {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;
  double clamped_mass = 0.0;  ///< negative joint mass removed (spectral path only)
};

inline constexpr double kInitialFloor = 1e-8;

/// pi_j = sum_i H(i, j); T = H diag(pi)^-1. pi entries below `floor` are raised
/// and pi renormalized; an all-zero column of H yields a uniform column of T.
ChainEstimate recover_pi_T(const Eigen::MatrixXd& H, double floor = kInitialFloor);

/// Unstabilized path: H = C^+ P21 (C^+)^T, negatives clamped to zero and H
/// renormalized before recover_pi_T.
ChainEstimate spectral_pi_T(const Eigen::MatrixXd& P21, const Eigen::MatrixXd& C);

/// States whose two per-cell probabilities differ by at least threshold,
/// sorted by decreasing gap. Requires exactly two cells (rows).
std::vector<int> differential_states(const Eigen::MatrixXd& per_cell_probs, double threshold);

}  // namespace bhmm

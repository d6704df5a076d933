#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/model.hpp"
#include "bhmm/moments.hpp"
#include "bhmm/recovery.hpp"
#include "bhmm/spectral.hpp"

namespace bhmm {

/// Feature-map tensor decomposition learner.
struct FtdConfig {
  int num_states = 4;
  int granularity = 30;
  PowerMethodConfig power;
  bool stabilize = true;  ///< least-squares joint recovery instead of pseudoinverses
  StabilizerConfig stabilizer;
  int threads = 1;
  /// Build the dense D' x D' x D' moment tensor instead of accumulating the
  /// whitened m x m x m tensor directly. Same estimate, slower.
  bool dense_moments = false;
};

struct FtdDiagnostics {
  std::size_t triples = 0;
  std::size_t feature_lookups = 0;  ///< observation-to-feature resolutions in the moment pass
  double asymmetry = 0.0;  ///< relative asymmetry of the whitened tensor
  double whitening_residual = 0.0;
  std::vector<double> eigenvalues;
  std::vector<double> deflation_residuals;
  double c_clamped_mass = 0.0;
  double h_clamped_mass = 0.0;  ///< spectral joint recovery only
  double ls_objective = 0.0;
  int ls_iterations = 0;
  bool ls_converged = true;
  Eigen::MatrixXd raw_probs;  ///< p before clamping into [0, 1]
};

struct RecoveredModel {
  HmmParams params;  ///< meth_probs holds one row per cell
  Eigen::VectorXd a_hat;
  Eigen::MatrixXd C_hat;
  FtdDiagnostics diagnostics;
};

/// Runs the learner on every overlapping triple of seq.
RecoveredModel fit_ftd(const Sequence& seq, const FtdConfig& cfg);

/// Runs the learner on given moments (for instance exact population moments).
RecoveredModel fit_ftd_moments(const MomentSet& moments, const Eigen::VectorXd& a_hat,
                               const FtdConfig& cfg);

}  // namespace bhmm

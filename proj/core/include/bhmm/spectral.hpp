#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/moments.hpp"
#include "bhmm/tensor.hpp"

namespace bhmm {

/// Maps of the x1 and x3 features onto the x2 view: S1 = P23 P13^+, S3 = P21 P31^+.
/// Pseudoinverses are truncated to num_states singular triplets; a singular
/// value below the rank cutoff raises NumericalError("rank condition violated").
struct Symmetrizers {
  Eigen::MatrixXd S1;
  Eigen::MatrixXd S3;
};
Symmetrizers symmetrizers(const MomentSet& moments, int num_states);

/// Second-view symmetrization of the triple moments.
struct Symmetrized {
  Eigen::MatrixXd S1;  ///< maps x1 features onto the x2 view: P23 P13^+
  Eigen::MatrixXd S3;  ///< maps x3 features onto the x2 view: P21 P31^+
  Tensor3 G;           ///< E[(S1 phi1) (x) phi2 (x) (S3 phi3)]
  double asymmetry = 0.0;
};

Symmetrized symmetrize(const MomentSet& moments, int num_states);

struct WhiteningData {
  Eigen::MatrixXd W;                ///< D' x m, W^T J W = I_m for exact rank-m J
  Eigen::VectorXd singular_values;  ///< top m singular values of J
  double residual = 0.0;            ///< ||W^T J W - I_m||_F
};

/// J = S3 P32; W = U_m S_m^{-1/2} from the top-m singular pairs of J.
WhiteningData whitening(const Eigen::MatrixXd& S3, const Eigen::MatrixXd& P32, int num_states);

struct Whitened {
  WhiteningData whitening;
  Tensor3 H;  ///< G(W, W, W), m x m x m
};

Whitened whiten(const Tensor3& G, const Eigen::MatrixXd& S3, const Eigen::MatrixXd& P32,
                int num_states);

struct PowerMethodConfig {
  int iters_per_component = 30;
  int restarts = 10;
  std::uint64_t seed = 0;
};

struct Eigenpairs {
  Eigen::VectorXd values;             ///< lambda_l > 0, in extraction order
  Eigen::MatrixXd vectors;            ///< unit columns v_l
  std::vector<double> deflation_residuals;  ///< ||H||_F after each deflation
};

/// Robust tensor power method with deflation. Every component keeps the
/// restart with the largest lambda; ties keep the earliest restart.
Eigenpairs tensor_power_method(const Tensor3& h, int num_components,
                               const PowerMethodConfig& cfg = {});

struct RecoveredFeatures {
  Eigen::MatrixXd C;          ///< D' x m, every D-block of every column sums to one
  double clamped_mass = 0.0;  ///< total |negative| mass removed before renormalizing
  int flipped_columns = 0;
};

/// Column l = (W^T)^+ lambda_l v_l, sign-fixed to a non-negative sum, then
/// clamped at zero and renormalized block by block.
RecoveredFeatures recover_C(const Eigenpairs& eig, const WhiteningData& whitening,
                            int block_size);

struct DecompositionResult {
  Eigenpairs eigen;
  WhiteningData whitening;
  Eigen::MatrixXd C_hat;
  double asymmetry = 0.0;  ///< of the whitened tensor
  double clamped_mass = 0.0;
};

/// tensor_power_method -> recover_C on an already whitened tensor.
/// The asymmetry field reports relative_asymmetry(h).
DecompositionResult decompose_whitened(const Tensor3& h, WhiteningData whitening, int block_size,
                                       const PowerMethodConfig& cfg = {});

/// symmetrize -> whiten -> decompose_whitened.
DecompositionResult decompose(const MomentSet& moments, int num_states,
                              const PowerMethodConfig& cfg = {});

}  // namespace bhmm

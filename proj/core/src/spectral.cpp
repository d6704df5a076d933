#include "bhmm/spectral.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "bhmm/error.hpp"
#include "bhmm/linalg.hpp"

namespace bhmm {

Symmetrizers symmetrizers(const MomentSet& moments, int num_states) {
  if (num_states < 1) throw ValidationError("num_states must be positive");
  if (num_states > moments.dim) {
    throw NumericalError("rank condition violated: " + std::to_string(num_states) +
                         " states exceed feature dimension " + std::to_string(moments.dim));
  }
  // P31 = P13^T exactly, so its truncated pseudoinverse is the transpose.
  const Eigen::MatrixXd p13_pinv = truncated_pinv(moments.P13, num_states, "P13");
  return {moments.P23 * p13_pinv, moments.P21 * p13_pinv.transpose()};
}

Symmetrized symmetrize(const MomentSet& moments, int num_states) {
  auto maps = symmetrizers(moments, num_states);
  Symmetrized out;
  out.S1 = std::move(maps.S1);
  out.S3 = std::move(maps.S3);
  const auto identity = Eigen::MatrixXd::Identity(moments.dim, moments.dim);
  // Factors enter transposed so that G = E[(S1 phi1) (x) phi2 (x) (S3 phi3)].
  out.G = multilinear(moments.T123, out.S1.transpose(), identity, out.S3.transpose());
  out.asymmetry = relative_asymmetry(out.G);
  return out;
}

WhiteningData whitening(const Eigen::MatrixXd& S3, const Eigen::MatrixXd& P32, int num_states) {
  const Eigen::MatrixXd J = S3 * P32;
  if (num_states < 1 || num_states > J.rows()) {
    throw NumericalError("whitening: cannot extract " + std::to_string(num_states) +
                         " directions from a " + std::to_string(J.rows()) + "-dim space");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double cutoff = rank_cutoff(J, s(0));
  const double sigma_m = s(num_states - 1);
  if (!(sigma_m > cutoff)) {
    std::ostringstream os;
    os << "whitening failed: sigma_" << num_states << " of J is " << sigma_m << " (cutoff "
       << cutoff << ")";
    throw NumericalError(os.str());
  }
  Eigen::MatrixXd u = svd.matrixU().leftCols(num_states);
  canonicalize_signs(u);

  WhiteningData out;
  out.singular_values = s.head(num_states);
  out.W = u * out.singular_values.cwiseSqrt().cwiseInverse().asDiagonal();
  out.residual =
      (out.W.transpose() * J * out.W - Eigen::MatrixXd::Identity(num_states, num_states)).norm();
  return out;
}

Whitened whiten(const Tensor3& G, const Eigen::MatrixXd& S3, const Eigen::MatrixXd& P32,
                int num_states) {
  Whitened out;
  out.whitening = whitening(S3, P32, num_states);
  const Eigen::MatrixXd& W = out.whitening.W;
  out.H = multilinear(G, W, W, W);
  return out;
}

Eigenpairs tensor_power_method(const Tensor3& h, int num_components,
                               const PowerMethodConfig& cfg) {
  const int m = h.dim(0);
  if (h.dim(1) != m || h.dim(2) != m) throw ValidationError("power method needs a cubical tensor");
  if (num_components < 1 || num_components > m) {
    throw ValidationError("power method: cannot extract " + std::to_string(num_components) +
                          " components from a " + std::to_string(m) + "-dim tensor");
  }
  if (cfg.iters_per_component < 1 || cfg.restarts < 1) {
    throw ValidationError("power method needs at least one iteration and one restart");
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor3 residual = h;
  const double tolerance = 1e-10 * h.norm();

  auto iterate = [&](Eigen::VectorXd v, int iters) {
    for (int it = 0; it < iters; ++it) {
      Eigen::VectorXd u = contract_last_two(residual, v);
      if (!u.allFinite()) throw NumericalError("power method produced non-finite values");
      const double norm = u.norm();
      if (norm == 0.0) break;
      v = u / norm;
    }
    double lambda = contract_all(residual, v);
    if (!std::isfinite(lambda)) throw NumericalError("power method produced non-finite values");
    // Odd order: (lambda, v) and (-lambda, -v) are the same component.
    if (lambda < 0.0) {
      lambda = -lambda;
      v = -v;
    }
    return std::pair{lambda, v};
  };

  Eigenpairs out;
  out.values.resize(num_components);
  out.vectors.resize(m, num_components);
  for (int l = 0; l < num_components; ++l) {
    double best_lambda = -1.0;
    Eigen::VectorXd best;
    for (int r = 0; r < cfg.restarts; ++r) {
      Eigen::VectorXd v(m);
      for (int i = 0; i < m; ++i) v(i) = gauss(rng);
      v.normalize();
      auto [lambda, w] = iterate(std::move(v), cfg.iters_per_component);
      if (lambda > best_lambda) {
        best_lambda = lambda;
        best = std::move(w);
      }
    }
    auto [lambda, v] = iterate(std::move(best), cfg.iters_per_component);
    if (!(lambda > tolerance)) {
      throw NumericalError("no component found: lambda_" + std::to_string(l + 1) + " = " +
                           std::to_string(lambda));
    }
    out.values(l) = lambda;
    out.vectors.col(l) = v;
    residual.add_rank1(-lambda, v, v, v);
    out.deflation_residuals.push_back(residual.norm());
  }
  return out;
}

RecoveredFeatures recover_C(const Eigenpairs& eig, const WhiteningData& whitening,
                            int block_size) {
  const Eigen::MatrixXd& W = whitening.W;
  const auto m = static_cast<int>(eig.values.size());
  if (W.cols() != m) throw ValidationError("recover_C: whitening rank differs from eigenpairs");
  if (block_size < 1 || W.rows() % block_size != 0) {
    throw ValidationError("recover_C: feature dimension is not a multiple of the block size");
  }
  const Eigen::MatrixXd back = truncated_pinv(W.transpose(), m, "W^T");

  RecoveredFeatures out;
  out.C = back * (eig.vectors * eig.values.asDiagonal());
  const int blocks = static_cast<int>(W.rows()) / block_size;
  for (int l = 0; l < m; ++l) {
    auto col = out.C.col(l);
    if (col.sum() < 0.0) {
      col *= -1.0;
      ++out.flipped_columns;
    }
    for (int b = 0; b < blocks; ++b) {
      auto block = col.segment(b * block_size, block_size);
      for (int i = 0; i < block_size; ++i) {
        if (block(i) < 0.0) {
          out.clamped_mass += -block(i);
          block(i) = 0.0;
        }
      }
      const double s = block.sum();
      if (s > 0.0) {
        block /= s;
      } else {
        block.setConstant(1.0 / block_size);
      }
    }
  }
  return out;
}

DecompositionResult decompose_whitened(const Tensor3& h, WhiteningData whitening, int block_size,
                                       const PowerMethodConfig& cfg) {
  DecompositionResult out;
  out.eigen = tensor_power_method(h, h.dim(0), cfg);
  auto features = recover_C(out.eigen, whitening, block_size);
  out.whitening = std::move(whitening);
  out.C_hat = std::move(features.C);
  out.asymmetry = relative_asymmetry(h);
  out.clamped_mass = features.clamped_mass;
  return out;
}

DecompositionResult decompose(const MomentSet& moments, int num_states,
                              const PowerMethodConfig& cfg) {
  if (moments.num_cells < 1 || moments.dim % moments.num_cells != 0) {
    throw ValidationError("moment set has inconsistent cell layout");
  }
  const auto sym = symmetrize(moments, num_states);
  auto white = whiten(sym.G, sym.S3, moments.P32, num_states);
  return decompose_whitened(white.H, std::move(white.whitening), moments.dim / moments.num_cells,
                            cfg);
}

}  // namespace bhmm

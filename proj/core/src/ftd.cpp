#include "bhmm/ftd.hpp"

#include "bhmm/error.hpp"
#include "bhmm/feature_map.hpp"

namespace bhmm {

namespace {

void check_inputs(const MomentSet& moments, const Eigen::VectorXd& a_hat, const FtdConfig& cfg) {
  if (cfg.num_states < 1) throw ValidationError("num_states must be positive");
  if (cfg.threads < 1) throw ValidationError("threads must be positive");
  if (moments.num_cells < 1 || moments.dim % moments.num_cells != 0) {
    throw ValidationError("moment set has inconsistent cell layout");
  }
  if (a_hat.size() != moments.num_cells) {
    throw ValidationError("a_hat has " + std::to_string(a_hat.size()) + " entries for " +
                          std::to_string(moments.num_cells) + " cells");
  }
}

/// Recovery of p, pi and T from a finished decomposition.
RecoveredModel finish(const MomentSet& moments, DecompositionResult dec,
                      const Eigen::VectorXd& a_hat, const FtdConfig& cfg) {
  const int granularity = moments.dim / moments.num_cells;
  RecoveredModel out;
  out.a_hat = a_hat;
  auto& diag = out.diagnostics;
  diag.triples = moments.count;
  diag.asymmetry = dec.asymmetry;
  diag.whitening_residual = dec.whitening.residual;
  diag.eigenvalues.assign(dec.eigen.values.data(),
                          dec.eigen.values.data() + dec.eigen.values.size());
  diag.deflation_residuals = dec.eigen.deflation_residuals;
  diag.c_clamped_mass = dec.clamped_mass;

  auto probs = recover_p(dec.C_hat, a_hat, granularity);
  diag.raw_probs = probs.raw;

  ChainEstimate chain;
  if (cfg.stabilize) {
    auto joint = stabilized_H21(moments.P21, dec.C_hat, cfg.stabilizer);
    diag.ls_objective = joint.objective;
    diag.ls_iterations = joint.iterations;
    diag.ls_converged = joint.converged;
    chain = recover_pi_T(joint.H);
  } else {
    chain = spectral_pi_T(moments.P21, dec.C_hat);
    diag.h_clamped_mass = chain.clamped_mass;
  }

  out.C_hat = std::move(dec.C_hat);
  out.params.initial = std::move(chain.initial);
  out.params.transition = std::move(chain.transition);
  out.params.meth_probs = std::move(probs.probs);
  out.params = validate_params(std::move(out.params));
  return out;
}

}  // namespace

RecoveredModel fit_ftd_moments(const MomentSet& moments, const Eigen::VectorXd& a_hat,
                               const FtdConfig& cfg) {
  check_inputs(moments, a_hat, cfg);
  return finish(moments, decompose(moments, cfg.num_states, cfg.power), a_hat, cfg);
}

RecoveredModel fit_ftd(const Sequence& seq, const FtdConfig& cfg) {
  BetaMapTable table(BetaMapConfig{cfg.granularity});
  if (cfg.dense_moments) {
    std::size_t lookups = 0;
    const auto moments = estimate_moments(seq, table, cfg.threads, &lookups);
    auto out = fit_ftd_moments(moments, empirical_a(seq), cfg);
    out.diagnostics.feature_lookups = lookups;
    return out;
  }

  const auto indexed = index_sequence(seq, table);
  const auto pairs = pair_moments(indexed);
  const auto a_hat = empirical_a(seq);
  check_inputs(pairs, a_hat, cfg);

  // H = T123(S1^T W, W, S3^T W), accumulated from projected features.
  const auto maps = symmetrizers(pairs, cfg.num_states);
  auto white = whitening(maps.S3, pairs.P32, cfg.num_states);
  const Eigen::MatrixXd wt = white.W.transpose();
  const Eigen::MatrixXd a2 = wt * indexed.features;
  const Eigen::MatrixXd a1 = (wt * maps.S1) * indexed.features;
  const Eigen::MatrixXd a3 = (wt * maps.S3) * indexed.features;
  const auto h = projected_tensor(indexed, a1, a2, a3, cfg.threads);

  auto out = finish(pairs,
                    decompose_whitened(h, std::move(white), pairs.dim / pairs.num_cells, cfg.power),
                    a_hat, cfg);
  out.diagnostics.feature_lookups = indexed.feature_lookups;
  return out;
}

}  // namespace bhmm

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bhmm/ftd.hpp"
#include "bhmm/model.hpp"

namespace bhmm {

struct EmConfig {
  int max_iters = 1000;
  /// Stop once (ll_t - ll_{t-1}) / |ll_{t-1}| falls below this fraction.
  double rel_ll_tolerance = 1e-3;
  std::uint64_t seed = 0;
  /// Starting point; random (Dirichlet(1) pi and T columns, p ~ U[0.05, 0.95]) when empty.
  std::optional<HmmParams> warm_start;
  /// Run exactly max_iters M-steps and ignore the tolerance.
  bool fixed_iterations = false;
};

void validate(const EmConfig& cfg);

struct EmTrace {
  /// log_likelihoods[i] is the training log-likelihood after i M-steps.
  std::vector<double> log_likelihoods;
  HmmParams params;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Exact log-likelihood by the scaled forward recursion. Emission at state h
/// is the product over cells of Binomial(meth | coverage, p[cell][h]).
/// Throws NumericalError when the sequence has zero probability.
double log_likelihood(const HmmParams& params, const Sequence& seq);

/// Baum-Welch for binomial emissions with per-cell probabilities.
EmTrace em_fit(const Sequence& seq, int num_states, const EmConfig& cfg);

HmmParams random_params(int num_states, int num_cells, std::mt19937_64& rng);

struct FtdEmResult {
  RecoveredModel ftd;
  EmTrace em;
};

/// The learner's output refined by exactly `rounds` EM iterations. With
/// rounds == 0 the EM stage is skipped and em.params equals ftd.params.
FtdEmResult ftd_then_em(const Sequence& seq, const FtdConfig& cfg, int rounds = 3);

}  // namespace bhmm

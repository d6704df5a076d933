#pragma once

// Reference computations used only by tests. Nothing here calls into the
// library's numerical code, so agreement is a genuine cross-check.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/model.hpp"
#include "bhmm/moments.hpp"
#include "bhmm/tensor.hpp"

namespace oracle {

/// D bin masses of Beta(mu + 1, c - mu + 1) from Boost's regularized incomplete beta.
Eigen::VectorXd beta_map(std::uint32_t c, std::uint32_t mu, int D);

/// Binomial pmf through lgamma.
double binom_pmf(std::uint32_t c, std::uint32_t mu, double p);

/// Coverage distribution as (coverage, probability) pairs.
using CoveragePmf = std::vector<std::pair<std::uint32_t, double>>;

CoveragePmf fixed_coverage(std::uint32_t c);

/// Column h = E[beta_map(x) | h] for one cell, summing over coverage and mu.
Eigen::MatrixXd expected_features(const Eigen::VectorXd& p, const CoveragePmf& cov, int D);

/// Stacked per-cell expected features, k*D x m.
Eigen::MatrixXd expected_features(const Eigen::MatrixXd& p, const CoveragePmf& cov, int D);

/// E[1 / (c + 2)].
double expected_a(const CoveragePmf& cov);

/// Population moments of (x1, x2, x3) with h1 ~ pi, by summing over every
/// hidden path (h1, h2, h3).
bhmm::MomentSet population_moments(const bhmm::HmmParams& params, const Eigen::MatrixXd& C);

/// Population moments computed by explicitly enumerating every observation
/// triple (c, mu) for tiny coverage; independent of expected_features.
bhmm::MomentSet enumerated_moments(const bhmm::HmmParams& params, const CoveragePmf& cov, int D);

/// Plain two-pass means over all overlapping triples, features from beta_map above.
bhmm::MomentSet naive_moments(const bhmm::Sequence& seq, int D);

/// log P(seq) by summing over all m^L hidden paths in log space.
double brute_log_likelihood(const bhmm::HmmParams& params, const bhmm::Sequence& seq);

/// min over all permutations of sum_h |p_h - q_{s(h)}| (columns are states).
double brute_matching(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q,
                      std::vector<int>* best = nullptr);

/// Stationary distribution of a column-stochastic matrix by eigen-solve.
Eigen::VectorXd stationary(const Eigen::MatrixXd& T);

// Seeded generators for property tests.

Eigen::VectorXd random_simplex(int n, std::mt19937_64& rng);
bhmm::HmmParams random_params(int m, int cells, std::mt19937_64& rng);
/// Random orthonormal n x n matrix (QR of a Gaussian matrix).
Eigen::MatrixXd random_orthonormal(int n, std::mt19937_64& rng);
/// Coverage uniform in [0, max_c], mu uniform in [0, c].
bhmm::Sequence random_sequence(std::size_t length, int cells, std::uint32_t max_c,
                               std::mt19937_64& rng);
/// Draw a path from the model with coverage from cov.
bhmm::Sequence sample(const bhmm::HmmParams& params, std::size_t length, const CoveragePmf& cov,
                      std::mt19937_64& rng);

}  // namespace oracle

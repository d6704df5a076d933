#pragma once

#include <cstdint>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/model.hpp"

namespace bhmm {

inline constexpr int kMaxGranularity = 256;

struct BetaMapConfig {
  int granularity = 30;  ///< number of equal-width bins on [0, 1]
};

/// Throws ValidationError unless 1 <= granularity <= kMaxGranularity.
void validate(const BetaMapConfig& cfg);

/// Beta maps of every (coverage, mu) with mu = 0..coverage, row-major:
/// row mu holds the D bin masses of Beta(mu + 1, coverage - mu + 1).
///
/// Bin masses are differences of the regularized incomplete Beta function,
/// evaluated exactly through I_x(mu + 1, c - mu + 1) = P(Binomial(c + 1, x) > mu).
/// Each bin uses whichever tail keeps the subtraction well conditioned.
std::vector<double> beta_map_rows(std::uint32_t coverage, int granularity);

/// D-bin discretization of the Beta(mu + 1, c - mu + 1) density.
Eigen::VectorXd beta_map(Observation obs, const BetaMapConfig& cfg);

/// Cell-ordered stack of beta_map over a multi-cell observation tuple.
Eigen::VectorXd concat_map(std::span<const Observation> obs, const BetaMapConfig& cfg);

/// Memoized Beta maps. All rows for one coverage value are computed together
/// on first use. Lookups are safe from several threads.
class BetaMapTable {
 public:
  explicit BetaMapTable(BetaMapConfig cfg);
  BetaMapTable(const BetaMapTable&) = delete;
  BetaMapTable& operator=(const BetaMapTable&) = delete;

  int granularity() const noexcept { return cfg_.granularity; }

  /// The D bin masses of obs. The span stays valid for the table's lifetime.
  std::span<const double> row(Observation obs) const;

  /// Writes the concatenated map of a multi-cell tuple into out (k * D values).
  void concat(std::span<const Observation> obs, std::span<double> out) const;

  std::size_t cached_coverages() const;

 private:
  const std::vector<double>& rows_for(std::uint32_t coverage) const;

  BetaMapConfig cfg_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::uint32_t, std::vector<double>> rows_;
};

/// Mean of 1 / (c_t + 2) over all positions of one cell.
double empirical_a(const Sequence& seq, std::size_t cell);

/// empirical_a for every cell.
Eigen::VectorXd empirical_a(const Sequence& seq);

}  // namespace bhmm

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/compensated.hpp"
#include "bhmm/feature_map.hpp"
#include "bhmm/model.hpp"
#include "bhmm/tensor.hpp"

namespace bhmm {

/// Empirical feature co-occurrence moments of consecutive triples.
///
/// Pij = mean of phi(x_i) phi(x_j)^T, T123 = mean of phi(x1) (x) phi(x2) (x) phi(x3).
/// With k cells every feature vector has k blocks summing to one, so matrices
/// carry total mass k^2 and the tensor k^3.
struct MomentSet {
  int dim = 0;
  int num_cells = 1;
  std::size_t count = 0;
  Eigen::MatrixXd P12, P21, P13, P31, P23, P32;
  Tensor3 T123;
};

inline constexpr double kMomentMassTolerance = 1e-9;

/// First violated MomentSet invariant, or nullopt.
std::optional<std::string> moment_violation(const MomentSet& m);

/// Count-weighted combination of two finalized moment sets. An empty set
/// (count 0) is the identity element.
MomentSet merge(const MomentSet& a, const MomentSet& b);

/// Dense ids for distinct observation tuples, with their concatenated feature
/// maps cached in id order.
class FeatureInterner {
 public:
  FeatureInterner(const BetaMapTable& table, std::size_t num_cells);

  /// Id of obs, assigning the next id (and resolving its features) when new.
  int intern(std::span<const Observation> obs);

  int dim() const noexcept { return dim_; }
  std::size_t num_cells() const noexcept { return num_cells_; }
  std::size_t size() const noexcept { return ids_.size(); }
  /// Number of intern() calls so far.
  std::size_t lookups() const noexcept { return lookups_; }

  const double* feature(int id) const noexcept {
    return features_.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(dim_);
  }
  /// dim x size(), column j = features of id j.
  Eigen::Map<const Eigen::MatrixXd> features() const noexcept {
    return {features_.data(), dim_, static_cast<Eigen::Index>(size())};
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<std::uint32_t>& key) const noexcept;
  };

  const BetaMapTable* table_;
  std::size_t num_cells_;
  int dim_;
  std::size_t lookups_ = 0;
  std::unordered_map<std::vector<std::uint32_t>, int, KeyHash> ids_;
  std::vector<std::uint32_t> scratch_key_;
  std::vector<double> features_;
};

/// Streaming accumulator of triple moments.
///
/// Observations are interned: every distinct observation tuple gets an id and
/// its feature vector is fetched once. Pending triples are grouped by the id
/// of x1 and flushed once the per-x1 buffers reach a memory budget, so the
/// tensor update is one matrix product per flush. Flush totals are added into
/// compensated running sums.
class MomentAccumulator {
 public:
  MomentAccumulator(const BetaMapTable& table, std::size_t num_cells);

  int dim() const noexcept { return interner_.dim(); }
  std::size_t num_cells() const noexcept { return interner_.num_cells(); }
  std::size_t count() const noexcept { return count_; }

  /// Number of observation-to-feature resolutions performed so far.
  std::size_t feature_lookups() const noexcept { return interner_.lookups() + merged_lookups_; }

  void add(const Triple& triple);

  /// Adds triples k = first..last-1 of seq (positions k, k+1, k+2),
  /// resolving each covered position once.
  void add_triples(const Sequence& seq, std::size_t first, std::size_t last);

  /// Adds every overlapping triple of seq.
  void add_sequence(const Sequence& seq);

  /// Absorbs other's totals. Both accumulators must share dim and cell count.
  void merge(MomentAccumulator& other);

  /// Normalized moments. Throws ValidationError("no data") when empty.
  MomentSet finalize();

 private:
  int intern(std::span<const Observation> obs);
  void push(int a, int b, int c);
  void flush();

  FeatureInterner interner_;
  std::size_t max_keys_;     // distinct x1 ids per flush
  std::size_t max_pending_;  // triples per flush
  std::size_t count_ = 0;
  std::size_t merged_lookups_ = 0;

  std::vector<int> pending_;  // flattened (a, b, c) id triples
  std::vector<int> local_;    // id -> column in the flush buffers, -1 if absent
  std::vector<int> keys_;     // column -> id

  CompensatedArray p12_, p13_, p23_, t123_;
};

/// A sequence rewritten as interned ids, one per position.
struct IndexedSequence {
  int dim = 0;
  int num_cells = 1;
  std::vector<int> ids;
  Eigen::MatrixXd features;  ///< dim x distinct observations
  std::size_t feature_lookups = 0;
};

/// Resolves every position of seq exactly once.
IndexedSequence index_sequence(const Sequence& seq, const BetaMapTable& table);

/// Pair moments of all overlapping triples, built from exact integer
/// co-occurrence counts as Phi N Phi^T / count. T123 is left empty.
MomentSet pair_moments(const IndexedSequence& seq);

/// Mean over triples of (A1 e_x1) (x) (A2 e_x2) (x) (A3 e_x3), where the
/// columns of A1, A2, A3 are indexed by observation id. With A_i = V_i^T Phi
/// this equals T123(V1, V2, V3) without forming T123.
Tensor3 projected_tensor(const IndexedSequence& seq, const Eigen::MatrixXd& a1,
                         const Eigen::MatrixXd& a2, const Eigen::MatrixXd& a3, int threads = 1);

/// Moments of all overlapping triples of seq, optionally split across threads
/// (shards merged in order, so results depend only on the thread count).
MomentSet estimate_moments(const Sequence& seq, const BetaMapTable& table, int threads = 1,
                           std::size_t* feature_lookups = nullptr);

}  // namespace bhmm

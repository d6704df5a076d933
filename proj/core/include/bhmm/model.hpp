#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/error.hpp"

namespace bhmm {

/// One (coverage, methylation count) pair. Valid iff meth <= coverage.
struct Observation {
  std::uint32_t coverage = 0;
  std::uint32_t meth = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

constexpr bool is_valid(Observation obs) noexcept { return obs.meth <= obs.coverage; }

/// An ordered run of positions, each carrying one Observation per cell type.
///
/// Storage is flat and position-major: the observations of position t occupy
/// [t * num_cells, (t + 1) * num_cells).
class Sequence {
 public:
  explicit Sequence(std::size_t num_cells = 1);
  Sequence(std::vector<Observation> flat, std::size_t num_cells);

  void push_back(Observation obs);
  void push_back(std::span<const Observation> position);
  void reserve(std::size_t positions) { data_.reserve(positions * num_cells_); }

  std::size_t size() const noexcept { return data_.size() / num_cells_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t num_cells() const noexcept { return num_cells_; }

  std::span<const Observation> operator[](std::size_t t) const noexcept {
    return {data_.data() + t * num_cells_, num_cells_};
  }
  Observation at(std::size_t t, std::size_t cell) const;
  std::span<const Observation> flat() const noexcept { return data_; }

  /// Positions [begin, end) as a new sequence.
  Sequence slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Sequence&, const Sequence&) = default;

 private:
  std::size_t num_cells_;
  std::vector<Observation> data_;
};

/// Observations at three consecutive positions of one sequence.
struct Triple {
  std::span<const Observation> x1;
  std::span<const Observation> x2;
  std::span<const Observation> x3;
};

/// All overlapping triples (t, t+1, t+2) of a sequence, in position order.
/// Throws ValidationError("insufficient length") for sequences shorter than 3.
inline auto triples(const Sequence& seq) {
  if (seq.size() < 3) {
    throw ValidationError("insufficient length: triples need at least 3 positions, got " +
                          std::to_string(seq.size()));
  }
  return std::views::iota(std::size_t{0}, seq.size() - 2) |
         std::views::transform([&seq](std::size_t k) {
           return Triple{seq[k], seq[k + 1], seq[k + 2]};
         });
}

/// Binomial HMM parameters.
///
/// transition(i, j) = P(h_{t+1} = i | h_t = j), so every column sums to one.
/// meth_probs has one row per cell type and one column per hidden state; the
/// single-cell model is the one-row case.
struct HmmParams {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transition;
  Eigen::MatrixXd meth_probs;

  int num_states() const noexcept { return static_cast<int>(initial.size()); }
  int num_cells() const noexcept { return static_cast<int>(meth_probs.rows()); }

  friend bool operator==(const HmmParams& a, const HmmParams& b) {
    return a.initial == b.initial && a.transition == b.transition &&
           a.meth_probs == b.meth_probs;
  }
};

inline constexpr double kStochasticTolerance = 1e-12;

/// Description of the first violated invariant, or nullopt when params are valid.
std::optional<std::string> first_violation(const HmmParams& params);

/// Returns params unchanged when every invariant holds, otherwise throws
/// ValidationError naming the offending index and value.
HmmParams validate_params(HmmParams params);

}  // namespace bhmm

#include "bhmm/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "bhmm/compensated.hpp"

namespace bhmm {

void validate(const BetaMapConfig& cfg) {
  if (cfg.granularity < 1 || cfg.granularity > kMaxGranularity) {
    throw ValidationError("granularity must be in [1, " + std::to_string(kMaxGranularity) +
                          "], got " + std::to_string(cfg.granularity));
  }
}

std::vector<double> beta_map_rows(std::uint32_t coverage, int granularity) {
  validate(BetaMapConfig{granularity});
  const std::size_t n = static_cast<std::size_t>(coverage) + 1;  // binomial trials
  const std::size_t rows = n;                                     // mu = 0..coverage
  const auto bins = static_cast<std::size_t>(granularity);

  // log C(n, j), built incrementally so no global lgamma state is touched.
  std::vector<double> log_choose(n + 1, 0.0);
  for (std::size_t j = 1; j <= n; ++j) {
    log_choose[j] = log_choose[j - 1] + std::log(static_cast<double>(n - j + 1)) -
                    std::log(static_cast<double>(j));
  }

  // lower(i, mu) = I_{i/D}(mu + 1, c - mu + 1) = P(Bin(n, i/D) >= mu + 1)
  // upper(i, mu) = 1 - lower(i, mu)            = P(Bin(n, i/D) <= mu)
  std::vector<double> lower((bins + 1) * rows);
  std::vector<double> upper((bins + 1) * rows);
  std::vector<double> pmf(n + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    double* lo = lower.data() + i * rows;
    double* up = upper.data() + i * rows;
    if (i == 0) {
      std::fill(lo, lo + rows, 0.0);
      std::fill(up, up + rows, 1.0);
      continue;
    }
    if (i == bins) {
      std::fill(lo, lo + rows, 1.0);
      std::fill(up, up + rows, 0.0);
      continue;
    }
    const double x = static_cast<double>(i) / static_cast<double>(bins);
    const double log_x = std::log(x);
    const double log_1mx = std::log1p(-x);
    for (std::size_t j = 0; j <= n; ++j) {
      pmf[j] = std::exp(log_choose[j] + static_cast<double>(j) * log_x +
                        static_cast<double>(n - j) * log_1mx);
    }
    double head = 0.0;
    for (std::size_t mu = 0; mu < rows; ++mu) {
      head += pmf[mu];
      up[mu] = head;
    }
    double tail = 0.0;
    for (std::size_t mu = rows; mu-- > 0;) {
      tail += pmf[mu + 1];
      lo[mu] = tail;
    }
  }

  std::vector<double> out(rows * bins);
  for (std::size_t mu = 0; mu < rows; ++mu) {
    for (std::size_t b = 1; b <= bins; ++b) {
      const double lo_prev = lower[(b - 1) * rows + mu];
      const double lo = lower[b * rows + mu];
      const double mass = lo <= 0.5 ? lo - lo_prev
                                    : upper[(b - 1) * rows + mu] - upper[b * rows + mu];
      out[mu * bins + (b - 1)] = std::max(mass, 0.0);
    }
  }
  return out;
}

Eigen::VectorXd beta_map(Observation obs, const BetaMapConfig& cfg) {
  validate(cfg);
  if (!is_valid(obs)) {
    throw ValidationError("beta_map: meth count " + std::to_string(obs.meth) +
                          " exceeds coverage " + std::to_string(obs.coverage));
  }
  const auto rows = beta_map_rows(obs.coverage, cfg.granularity);
  Eigen::VectorXd v(cfg.granularity);
  std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(obs.meth) * cfg.granularity,
              cfg.granularity, v.data());
  return v;
}

Eigen::VectorXd concat_map(std::span<const Observation> obs, const BetaMapConfig& cfg) {
  if (obs.empty()) throw ValidationError("concat_map: empty observation tuple");
  const int d = cfg.granularity;
  Eigen::VectorXd out(static_cast<Eigen::Index>(obs.size()) * d);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    out.segment(static_cast<Eigen::Index>(k) * d, d) = beta_map(obs[k], cfg);
  }
  return out;
}

BetaMapTable::BetaMapTable(BetaMapConfig cfg) : cfg_(cfg) { validate(cfg_); }

const std::vector<double>& BetaMapTable::rows_for(std::uint32_t coverage) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = rows_.find(coverage); it != rows_.end()) return it->second;
  }
  auto rows = beta_map_rows(coverage, cfg_.granularity);
  std::unique_lock lock(mutex_);
  // Another thread may have inserted first; emplace keeps the existing node.
  return rows_.try_emplace(coverage, std::move(rows)).first->second;
}

std::span<const double> BetaMapTable::row(Observation obs) const {
  if (!is_valid(obs)) {
    throw ValidationError("beta map: meth count " + std::to_string(obs.meth) +
                          " exceeds coverage " + std::to_string(obs.coverage));
  }
  const auto& rows = rows_for(obs.coverage);
  return {rows.data() + static_cast<std::size_t>(obs.meth) * cfg_.granularity,
          static_cast<std::size_t>(cfg_.granularity)};
}

void BetaMapTable::concat(std::span<const Observation> obs, std::span<double> out) const {
  const auto d = static_cast<std::size_t>(cfg_.granularity);
  if (out.size() != obs.size() * d) {
    throw ValidationError("concat: output has " + std::to_string(out.size()) +
                          " slots, expected " + std::to_string(obs.size() * d));
  }
  for (std::size_t k = 0; k < obs.size(); ++k) {
    auto r = row(obs[k]);
    std::copy(r.begin(), r.end(), out.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
}

std::size_t BetaMapTable::cached_coverages() const {
  std::shared_lock lock(mutex_);
  return rows_.size();
}

double empirical_a(const Sequence& seq, std::size_t cell) {
  if (seq.empty()) throw ValidationError("empirical_a: empty sequence");
  if (cell >= seq.num_cells()) throw ValidationError("empirical_a: cell index out of range");
  CompensatedSum sum;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    sum.add(1.0 / (static_cast<double>(seq[t][cell].coverage) + 2.0));
  }
  return sum.value() / static_cast<double>(seq.size());
}

Eigen::VectorXd empirical_a(const Sequence& seq) {
  Eigen::VectorXd a(static_cast<Eigen::Index>(seq.num_cells()));
  for (std::size_t k = 0; k < seq.num_cells(); ++k) a(static_cast<Eigen::Index>(k)) = empirical_a(seq, k);
  return a;
}

}  // namespace bhmm

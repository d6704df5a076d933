#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bhmm/em.hpp"
#include "bhmm/ftd.hpp"
#include "bhmm/model.hpp"

namespace bhmm {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Hash of a master seed and a list of tags; stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) noexcept;

struct SynthConfig {
  int num_states = 4;
  /// The lower half of the states draw p from [0, low_max], the rest from [high_min, 1].
  double low_max = 0.3;
  double high_min = 0.7;
  double transition_mix = 0.2;  ///< T = mix * I + (1 - mix) * U
  double coverage_mean = 25.0;
  std::vector<std::size_t> lengths = {128, 256, 512, 1024, 2048, 4096, 8192};
  int trials = 20;
  std::uint64_t seed = 0;
  FtdConfig ftd;
  EmConfig em;
  int threads = 1;  ///< rows run concurrently; results do not depend on it
};

void validate(const SynthConfig& cfg);

HmmParams generate_params(const SynthConfig& cfg, std::uint64_t seed);

struct SampledPath {
  Sequence sequence;
  std::vector<int> states;
};

/// h_1 ~ pi, h_{t+1} ~ T[:, h_t], c ~ Poisson(mean) per cell, mu ~ Binomial(c, p[cell][h]).
SampledPath sample_path(const HmmParams& params, std::size_t length, double coverage_mean,
                        std::uint64_t seed);
Sequence sample_sequence(const HmmParams& params, std::size_t length, double coverage_mean,
                         std::uint64_t seed);

enum class Algorithm { Ftd, Em };
std::string to_string(Algorithm a);

struct ExperimentRow {
  std::size_t length = 0;
  int trial = 0;
  Algorithm algorithm = Algorithm::Ftd;
  double error = 0.0;  ///< NaN when the fit failed
  double seconds = 0.0;
  std::string status = "ok";
  HmmParams truth;
  HmmParams estimate;  ///< empty when the fit failed
};

struct ExperimentSummary {
  std::size_t length = 0;
  Algorithm algorithm = Algorithm::Ftd;
  int trials = 0;  ///< successful fits
  double mean_error = 0.0;
  double sd_error = 0.0;  ///< sample standard deviation
  double mean_seconds = 0.0;
  int failures = 0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentSummary> summaries;
};

/// Aggregates per (length, algorithm) in order of first appearance.
std::vector<ExperimentSummary> summarize(const std::vector<ExperimentRow>& rows);

/// Every trial draws one model; every (length, trial) draws one sequence from
/// it, fitted by both FTD and EM. Fit failures are recorded in the row status.
ExperimentReport run_benchmark(const SynthConfig& cfg);

void write_rows_csv(const ExperimentReport& report, std::ostream& out);
void write_summary_csv(const ExperimentReport& report, std::ostream& out);

}  // namespace bhmm

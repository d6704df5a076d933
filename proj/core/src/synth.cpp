#include "bhmm/synth.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include "bhmm/error.hpp"
#include "bhmm/hungarian.hpp"

namespace bhmm {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = splitmix64(master);
  for (auto t : tags) h = splitmix64(h ^ splitmix64(t));
  return h;
}

void validate(const SynthConfig& cfg) {
  if (cfg.num_states < 1) throw ValidationError("num_states must be positive");
  if (!(cfg.low_max >= 0.0 && cfg.low_max <= cfg.high_min && cfg.high_min <= 1.0)) {
    throw ValidationError("need 0 <= low_max <= high_min <= 1");
  }
  if (!(cfg.transition_mix >= 0.0 && cfg.transition_mix <= 1.0)) {
    throw ValidationError("transition_mix must lie in [0, 1]");
  }
  if (!(cfg.coverage_mean > 0.0)) throw ValidationError("coverage_mean must be positive");
  for (auto len : cfg.lengths) {
    if (len < 3) throw ValidationError("lengths must be at least 3, got " + std::to_string(len));
  }
  if (cfg.trials < 1) throw ValidationError("trials must be positive");
  if (cfg.threads < 1) throw ValidationError("threads must be positive");
}

HmmParams generate_params(const SynthConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const int m = cfg.num_states;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  HmmParams p;
  p.meth_probs.resize(1, m);
  const int low = m / 2;
  for (int h = 0; h < m; ++h) {
    p.meth_probs(0, h) = h < low ? cfg.low_max * unit(rng)
                                 : cfg.high_min + (1.0 - cfg.high_min) * unit(rng);
  }
  Eigen::MatrixXd u(m, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) u(i, j) = unit(rng);
    u.col(j) /= u.col(j).sum();
  }
  p.transition = cfg.transition_mix * Eigen::MatrixXd::Identity(m, m) + (1.0 - cfg.transition_mix) * u;
  for (int j = 0; j < m; ++j) p.transition.col(j) /= p.transition.col(j).sum();
  p.initial.resize(m);
  for (int h = 0; h < m; ++h) p.initial(h) = unit(rng);
  p.initial /= p.initial.sum();
  return validate_params(std::move(p));
}

namespace {

int draw_categorical(const double* probs, int n, double u) {
  double acc = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;
}

}  // namespace

SampledPath sample_path(const HmmParams& params, std::size_t length, double coverage_mean,
                        std::uint64_t seed) {
  validate_params(params);
  if (!(coverage_mean > 0.0)) throw ValidationError("coverage_mean must be positive");
  const int m = params.num_states();
  const auto cells = static_cast<std::size_t>(params.num_cells());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<std::uint32_t> coverage(coverage_mean);

  SampledPath out{Sequence(cells), {}};
  out.sequence.reserve(length);
  out.states.reserve(length);
  std::vector<Observation> pos(cells);
  int h = 0;
  for (std::size_t t = 0; t < length; ++t) {
    h = t == 0 ? draw_categorical(params.initial.data(), m, unit(rng))
               : draw_categorical(params.transition.col(h).data(), m, unit(rng));
    out.states.push_back(h);
    for (std::size_t k = 0; k < cells; ++k) {
      const auto c = coverage(rng);
      std::binomial_distribution<std::uint32_t> meth(c, params.meth_probs(static_cast<Eigen::Index>(k), h));
      pos[k] = Observation{c, c == 0 ? 0u : meth(rng)};
    }
    out.sequence.push_back(std::span<const Observation>(pos));
  }
  return out;
}

Sequence sample_sequence(const HmmParams& params, std::size_t length, double coverage_mean,
                         std::uint64_t seed) {
  return sample_path(params, length, coverage_mean, seed).sequence;
}

std::string to_string(Algorithm a) { return a == Algorithm::Ftd ? "FTD" : "EM"; }

std::vector<ExperimentSummary> summarize(const std::vector<ExperimentRow>& rows) {
  std::vector<ExperimentSummary> out;
  std::map<std::pair<std::size_t, int>, std::size_t> index;
  std::vector<std::vector<const ExperimentRow*>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.length, static_cast<int>(r.algorithm));
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      out.push_back(ExperimentSummary{r.length, r.algorithm});
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    auto& s = out[g];
    double sum = 0.0, secs = 0.0;
    for (const auto* r : groups[g]) {
      secs += r->seconds;
      if (r->status == "ok") {
        ++s.trials;
        sum += r->error;
      } else {
        ++s.failures;
      }
    }
    s.mean_seconds = secs / static_cast<double>(groups[g].size());
    if (s.trials == 0) {
      s.mean_error = s.sd_error = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    s.mean_error = sum / s.trials;
    double ss = 0.0;
    for (const auto* r : groups[g]) {
      if (r->status == "ok") ss += (r->error - s.mean_error) * (r->error - s.mean_error);
    }
    s.sd_error = s.trials > 1 ? std::sqrt(ss / (s.trials - 1)) : 0.0;
  }
  return out;
}

namespace {

ExperimentRow run_row(const SynthConfig& cfg, std::size_t length, int trial, Algorithm algo) {
  ExperimentRow row;
  row.length = length;
  row.trial = trial;
  row.algorithm = algo;
  // One parameter set per trial, shared by every length; one sequence per (length, trial).
  row.truth = generate_params(cfg, derive_seed(cfg.seed, {static_cast<std::uint64_t>(trial), 0}));
  const auto seq = sample_sequence(row.truth, length, cfg.coverage_mean,
                                   derive_seed(cfg.seed, {length, static_cast<std::uint64_t>(trial), 0}));
  const auto fit_seed =
      derive_seed(cfg.seed, {length, static_cast<std::uint64_t>(trial), 1 + static_cast<std::uint64_t>(algo)});
  const auto start = std::chrono::steady_clock::now();
  try {
    if (algo == Algorithm::Ftd) {
      auto fcfg = cfg.ftd;
      fcfg.num_states = cfg.num_states;
      fcfg.power.seed = fit_seed;
      row.estimate = fit_ftd(seq, fcfg).params;
    } else {
      auto ecfg = cfg.em;
      ecfg.seed = fit_seed;
      row.estimate = em_fit(seq, cfg.num_states, ecfg).params;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.error = estimation_error(row.truth.meth_probs, row.estimate.meth_probs).error;
  } catch (const std::exception& e) {
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.error = std::numeric_limits<double>::quiet_NaN();
    row.status = std::string("failed: ") + e.what();
  }
  return row;
}

}  // namespace

ExperimentReport run_benchmark(const SynthConfig& cfg) {
  validate(cfg);
  struct Job {
    std::size_t length;
    int trial;
    Algorithm algo;
  };
  std::vector<Job> jobs;
  for (auto len : cfg.lengths) {
    for (int t = 0; t < cfg.trials; ++t) {
      jobs.push_back({len, t, Algorithm::Ftd});
      jobs.push_back({len, t, Algorithm::Em});
    }
  }
  ExperimentReport report;
  report.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      report.rows[i] = run_row(cfg, jobs[i].length, jobs[i].trial, jobs[i].algo);
    }
  };
  if (cfg.threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
  }
  report.summaries = summarize(report.rows);
  return report;
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

void write_rows_csv(const ExperimentReport& report, std::ostream& out) {
  out << "length,trial,algorithm,error,seconds,status\n";
  for (const auto& r : report.rows) {
    out << r.length << ',' << r.trial << ',' << to_string(r.algorithm) << ',' << fmt(r.error) << ','
        << fmt(r.seconds) << ',' << csv_field(r.status) << '\n';
  }
}

void write_summary_csv(const ExperimentReport& report, std::ostream& out) {
  out << "length,algorithm,trials,mean_error,sd_error,mean_seconds,failures\n";
  for (const auto& s : report.summaries) {
    out << s.length << ',' << to_string(s.algorithm) << ',' << s.trials << ',' << fmt(s.mean_error)
        << ',' << fmt(s.sd_error) << ',' << fmt(s.mean_seconds) << ',' << s.failures << '\n';
  }
}

}  // namespace bhmm

#include "bhmm/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bhmm/error.hpp"

namespace bhmm {

namespace {

/// Per-fit constants: log binomial coefficients of each position (summed over cells).
std::vector<double> log_binomial_coefficients(const Sequence& seq) {
  std::uint32_t max_c = 0;
  for (auto obs : seq.flat()) max_c = std::max(max_c, obs.coverage);
  std::vector<double> log_fact(static_cast<std::size_t>(max_c) + 1, 0.0);
  for (std::size_t i = 2; i < log_fact.size(); ++i) {
    log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  }
  std::vector<double> out(seq.size(), 0.0);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (auto obs : seq[t]) {
      out[t] += log_fact[obs.coverage] - log_fact[obs.meth] - log_fact[obs.coverage - obs.meth];
    }
  }
  return out;
}

/// Emission likelihoods scaled per position: e(h, t) = exp(log_e(h, t) - shift(t)).
struct Emissions {
  Eigen::MatrixXd e;      // m x L
  Eigen::VectorXd shift;  // L
};

Emissions emissions(const HmmParams& params, const Sequence& seq,
                    const std::vector<double>& log_binom) {
  const int m = params.num_states();
  const auto cells = seq.num_cells();
  if (params.num_cells() != static_cast<int>(cells)) {
    throw ValidationError("params describe " + std::to_string(params.num_cells()) +
                          " cells, sequence has " + std::to_string(cells));
  }
  const Eigen::ArrayXXd log_p = params.meth_probs.array().log();
  const Eigen::ArrayXXd log_q = (-params.meth_probs.array()).log1p();
  const auto len = static_cast<Eigen::Index>(seq.size());
  Emissions out{Eigen::MatrixXd(m, len), Eigen::VectorXd(len)};
  for (Eigen::Index t = 0; t < len; ++t) {
    auto pos = seq[static_cast<std::size_t>(t)];
    double best = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < m; ++h) {
      double v = log_binom[static_cast<std::size_t>(t)];
      for (std::size_t k = 0; k < cells; ++k) {
        const auto c = pos[k].coverage, mu = pos[k].meth;
        const auto kk = static_cast<Eigen::Index>(k);
        if (mu > 0) v += mu * log_p(kk, h);
        if (c > mu) v += (c - mu) * log_q(kk, h);
      }
      out.e(h, t) = v;
      best = std::max(best, v);
    }
    if (!std::isfinite(best)) {
      throw NumericalError("non-finite log-likelihood: position " + std::to_string(t) +
                           " is impossible under every state");
    }
    out.shift(t) = best;
    out.e.col(t) = (out.e.col(t).array() - best).exp();
  }
  return out;
}

struct ForwardPass {
  Eigen::MatrixXd alpha;  // m x L, each column normalized
  Eigen::VectorXd scale;  // L
  double log_likelihood = 0.0;
};

ForwardPass forward(const HmmParams& params, const Emissions& em) {
  const auto len = em.e.cols();
  ForwardPass f{Eigen::MatrixXd(params.num_states(), len), Eigen::VectorXd(len), 0.0};
  for (Eigen::Index t = 0; t < len; ++t) {
    if (t == 0) {
      f.alpha.col(0) = params.initial.cwiseProduct(em.e.col(0));
    } else {
      f.alpha.col(t).noalias() = params.transition * f.alpha.col(t - 1);
      f.alpha.col(t) = f.alpha.col(t).cwiseProduct(em.e.col(t));
    }
    const double s = f.alpha.col(t).sum();
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw NumericalError("non-finite log-likelihood: forward mass vanished at position " +
                           std::to_string(t));
    }
    f.alpha.col(t) /= s;
    f.scale(t) = s;
    f.log_likelihood += std::log(s) + em.shift(t);
  }
  return f;
}

struct Statistics {
  Eigen::VectorXd first;       // gamma_0
  Eigen::MatrixXd transitions; // expected (next = i, current = j) counts
  Eigen::MatrixXd meth;        // cells x m, sum gamma * mu
  Eigen::MatrixXd coverage;    // cells x m, sum gamma * c
  double log_likelihood = 0.0;
};

Statistics expectation(const HmmParams& params, const Sequence& seq,
                       const std::vector<double>& log_binom) {
  const auto em = emissions(params, seq, log_binom);
  const auto fwd = forward(params, em);
  const int m = params.num_states();
  const auto cells = static_cast<Eigen::Index>(seq.num_cells());
  const auto len = static_cast<Eigen::Index>(seq.size());

  Statistics st;
  st.log_likelihood = fwd.log_likelihood;
  st.transitions = Eigen::MatrixXd::Zero(m, m);
  st.meth = Eigen::MatrixXd::Zero(cells, m);
  st.coverage = Eigen::MatrixXd::Zero(cells, m);

  Eigen::VectorXd beta = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd w(m);
  Eigen::VectorXd gamma(m);
  for (Eigen::Index t = len - 1; t >= 0; --t) {
    if (t < len - 1) {
      w = em.e.col(t + 1).cwiseProduct(beta) / fwd.scale(t + 1);
      st.transitions.noalias() += w * fwd.alpha.col(t).transpose();
      beta.noalias() = params.transition.transpose() * w;
    }
    gamma = fwd.alpha.col(t).cwiseProduct(beta);
    gamma /= gamma.sum();
    auto pos = seq[static_cast<std::size_t>(t)];
    for (Eigen::Index k = 0; k < cells; ++k) {
      st.meth.row(k) += pos[static_cast<std::size_t>(k)].meth * gamma.transpose();
      st.coverage.row(k) += pos[static_cast<std::size_t>(k)].coverage * gamma.transpose();
    }
    if (t == 0) st.first = gamma;
  }
  st.transitions = st.transitions.cwiseProduct(params.transition);
  return st;
}

HmmParams maximization(const Statistics& st, const HmmParams& previous,
                       std::vector<std::string>& warnings) {
  const int m = previous.num_states();
  HmmParams next;
  next.initial = st.first / st.first.sum();
  next.transition.resize(m, m);
  for (int j = 0; j < m; ++j) {
    const double s = st.transitions.col(j).sum();
    if (s > 0.0) {
      next.transition.col(j) = st.transitions.col(j) / s;
      next.transition.col(j) /= next.transition.col(j).sum();
    } else {
      next.transition.col(j) = previous.transition.col(j);
    }
  }
  next.meth_probs.resize(st.meth.rows(), m);
  for (Eigen::Index k = 0; k < st.meth.rows(); ++k) {
    for (int h = 0; h < m; ++h) {
      if (st.coverage(k, h) > 0.0) {
        next.meth_probs(k, h) = std::clamp(st.meth(k, h) / st.coverage(k, h), 0.0, 1.0);
      } else {
        next.meth_probs(k, h) = 0.5;
        warnings.push_back("state " + std::to_string(h) + " has no expected coverage in cell " +
                           std::to_string(k) + "; p set to 0.5");
      }
    }
  }
  return next;
}

HmmParams sanitize_warm_start(HmmParams p) {
  constexpr double eps = 1e-6;
  const int m = p.num_states();
  p.meth_probs = p.meth_probs.cwiseMax(eps).cwiseMin(1.0 - eps);
  p.initial = (1.0 - eps) * p.initial.array() + eps / m;
  p.initial /= p.initial.sum();
  p.transition = (1.0 - eps) * p.transition.array() + eps / m;
  for (int j = 0; j < m; ++j) p.transition.col(j) /= p.transition.col(j).sum();
  return p;
}

}  // namespace

void validate(const EmConfig& cfg) {
  if (cfg.max_iters < 0 || (!cfg.fixed_iterations && cfg.max_iters < 1)) {
    throw ValidationError("EM max_iters must be at least 1");
  }
  if (!(cfg.rel_ll_tolerance > 0.0)) throw ValidationError("EM tolerance must be positive");
}

double log_likelihood(const HmmParams& params, const Sequence& seq) {
  if (seq.empty()) throw ValidationError("log_likelihood: empty sequence");
  const auto log_binom = log_binomial_coefficients(seq);
  const double ll = forward(params, emissions(params, seq, log_binom)).log_likelihood;
  if (!std::isfinite(ll)) throw NumericalError("non-finite log-likelihood");
  return ll;
}

HmmParams random_params(int num_states, int num_cells, std::mt19937_64& rng) {
  std::exponential_distribution<double> gamma1(1.0);  // Dirichlet(1) via Gamma(1) draws
  std::uniform_real_distribution<double> prob(0.05, 0.95);
  HmmParams p;
  p.initial.resize(num_states);
  for (int i = 0; i < num_states; ++i) p.initial(i) = gamma1(rng);
  p.initial /= p.initial.sum();
  p.transition.resize(num_states, num_states);
  for (int j = 0; j < num_states; ++j) {
    for (int i = 0; i < num_states; ++i) p.transition(i, j) = gamma1(rng);
    p.transition.col(j) /= p.transition.col(j).sum();
  }
  p.meth_probs.resize(num_cells, num_states);
  for (int k = 0; k < num_cells; ++k) {
    for (int h = 0; h < num_states; ++h) p.meth_probs(k, h) = prob(rng);
  }
  return p;
}

EmTrace em_fit(const Sequence& seq, int num_states, const EmConfig& cfg) {
  validate(cfg);
  if (num_states < 1) throw ValidationError("num_states must be positive");
  if (seq.size() < 2) throw ValidationError("EM needs a sequence of length at least 2");

  EmTrace trace;
  if (cfg.warm_start) {
    trace.params = validate_params(*cfg.warm_start);
    if (trace.params.num_states() != num_states) {
      throw ValidationError("warm start has " + std::to_string(trace.params.num_states()) +
                            " states, expected " + std::to_string(num_states));
    }
  } else {
    std::mt19937_64 rng(cfg.seed);
    trace.params = random_params(num_states, static_cast<int>(seq.num_cells()), rng);
  }

  const auto log_binom = log_binomial_coefficients(seq);
  auto stats = expectation(trace.params, seq, log_binom);
  trace.log_likelihoods.push_back(stats.log_likelihood);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    trace.params = maximization(stats, trace.params, trace.warnings);
    stats = expectation(trace.params, seq, log_binom);
    const double prev = trace.log_likelihoods.back();
    trace.log_likelihoods.push_back(stats.log_likelihood);
    trace.iterations = it;
    if (!cfg.fixed_iterations &&
        (stats.log_likelihood - prev) < cfg.rel_ll_tolerance * std::abs(prev)) {
      trace.converged = true;
      break;
    }
  }
  trace.params = validate_params(std::move(trace.params));
  return trace;
}

FtdEmResult ftd_then_em(const Sequence& seq, const FtdConfig& cfg, int rounds) {
  if (rounds < 0) throw ValidationError("EM rounds must be non-negative");
  FtdEmResult out;
  out.ftd = fit_ftd(seq, cfg);
  if (rounds == 0) {
    out.em.params = out.ftd.params;
    return out;
  }
  EmConfig em;
  em.max_iters = rounds;
  em.fixed_iterations = true;
  em.warm_start = sanitize_warm_start(out.ftd.params);
  out.em = em_fit(seq, cfg.num_states, em);
  return out;
}

}  // namespace bhmm

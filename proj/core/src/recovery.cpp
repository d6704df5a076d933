#include "bhmm/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "bhmm/error.hpp"
#include "bhmm/linalg.hpp"

namespace bhmm {

ProbabilityEstimate recover_p(const Eigen::MatrixXd& C, const Eigen::VectorXd& a_hat,
                              int granularity) {
  const auto cells = static_cast<int>(a_hat.size());
  if (granularity < 1 || cells < 1 || C.rows() != static_cast<Eigen::Index>(cells) * granularity) {
    throw ValidationError("recover_p: C has " + std::to_string(C.rows()) + " rows, expected " +
                          std::to_string(cells) + " x " + std::to_string(granularity));
  }
  const auto m = C.cols();
  ProbabilityEstimate out;
  out.probs.resize(cells, m);
  out.raw.resize(cells, m);
  for (int k = 0; k < cells; ++k) {
    const double a = a_hat(k);
    if (!(a >= 0.0 && a < 0.5)) {
      throw ValidationError("recover_p: a_hat = " + std::to_string(a) + " for cell " +
                            std::to_string(k) + " (needs a < 0.5; all coverage zero?)");
    }
    for (Eigen::Index h = 0; h < m; ++h) {
      const auto block = C.col(h).segment(static_cast<Eigen::Index>(k) * granularity, granularity);
      if (std::abs(block.sum() - 1.0) > 1e-6) {
        throw ValidationError("recover_p: block " + std::to_string(k) + " of column " +
                              std::to_string(h) + " sums to " + std::to_string(block.sum()));
      }
      double mean = 0.0;
      for (int i = 0; i < granularity; ++i) {
        mean += static_cast<double>(i + 1) / granularity * block(i);
      }
      const double p = (mean - a) / (1.0 - 2.0 * a);
      out.raw(k, h) = p;
      out.probs(k, h) = std::clamp(p, 0.0, 1.0);
    }
  }
  return out;
}

void project_to_simplex(std::span<double> x) {
  if (x.empty()) throw ValidationError("cannot project an empty vector onto the simplex");
  std::vector<double> u(x.begin(), x.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (auto& v : x) v = std::max(v - theta, 0.0);
}

namespace {

double ls_objective(const Eigen::MatrixXd& P, const Eigen::MatrixXd& C, const Eigen::MatrixXd& H) {
  return (P - C * H * C.transpose()).squaredNorm();
}

}  // namespace

JointEstimate stabilized_H21(const Eigen::MatrixXd& P21, const Eigen::MatrixXd& C,
                             const StabilizerConfig& cfg) {
  const auto m = C.cols();
  if (m < 1 || P21.rows() != C.rows() || P21.cols() != C.rows()) {
    throw ValidationError("stabilized_H21: P21 must be D' x D' with D' = rows of C");
  }
  const Eigen::MatrixXd G = C.transpose() * C;
  const Eigen::MatrixXd B = C.transpose() * P21 * C;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const double sigma = svd.singularValues()(0);
  const double sigma_min = svd.singularValues()(m - 1);
  if (!(sigma_min > rank_cutoff(G, sigma))) {
    throw NumericalError("rank condition violated: C is not of full column rank");
  }
  double step = 1.0 / (sigma * sigma);

  JointEstimate out;
  Eigen::MatrixXd H = Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m * m));
  double f = ls_objective(P21, C, H);
  out.initial_objective = f;
  if (cfg.record_trace) out.trace.push_back(f);

  // f(H') - f(H) = <H' - H, G (H + H') G - 2B>, evaluated in m x m space.
  Eigen::MatrixXd candidate(m, m), grad(m, m), gh(m, m);
  for (int it = 0; it < cfg.max_iters; ++it) {
    gh.noalias() = G * H;
    grad.noalias() = gh * G;
    grad -= B;
    double drop = 0.0;
    bool decreased = false;
    for (int halving = 0; halving < 40; ++halving) {
      candidate = H - step * grad;
      project_to_simplex(std::span<double>(candidate.data(), static_cast<std::size_t>(m * m)));
      gh.noalias() = G * (H + candidate) * G - 2.0 * B;
      drop = -((candidate - H).cwiseProduct(gh)).sum();
      if (drop >= 0.0) {
        decreased = true;
        break;
      }
      step *= 0.5;
    }
    out.iterations = it + 1;
    if (!decreased) {
      out.converged = true;  // no descent possible at machine precision
      break;
    }
    const double f_prev = f;
    H = candidate;
    f = std::max(f - drop, 0.0);
    if (cfg.record_trace) out.trace.push_back(ls_objective(P21, C, H));
    if (drop <= cfg.rel_tol * f_prev) {
      out.converged = true;
      break;
    }
  }
  f = ls_objective(P21, C, H);
  out.H = std::move(H);
  out.objective = f;
  return out;
}

ChainEstimate recover_pi_T(const Eigen::MatrixXd& H, double floor) {
  const auto m = H.rows();
  if (m < 1 || H.cols() != m) throw ValidationError("recover_pi_T: H must be square");
  if ((H.array() < 0.0).any() || std::abs(H.sum() - 1.0) > 1e-9) {
    throw ValidationError("recover_pi_T: H must be non-negative and sum to one");
  }
  ChainEstimate out;
  out.initial = H.colwise().sum().transpose();
  out.initial = out.initial.cwiseMax(floor);
  out.initial /= out.initial.sum();
  out.transition.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double s = H.col(j).sum();
    if (s > 0.0) {
      out.transition.col(j) = H.col(j) / s;
      out.transition.col(j) /= out.transition.col(j).sum();
    } else {
      out.transition.col(j).setConstant(1.0 / static_cast<double>(m));
    }
  }
  return out;
}

ChainEstimate spectral_pi_T(const Eigen::MatrixXd& P21, const Eigen::MatrixXd& C) {
  const auto m = static_cast<int>(C.cols());
  const Eigen::MatrixXd Cp = truncated_pinv(C, m, "C");
  Eigen::MatrixXd H = Cp * P21 * Cp.transpose();
  double clamped = 0.0;
  for (Eigen::Index i = 0; i < H.size(); ++i) {
    double& v = H.data()[i];
    if (v < 0.0) {
      clamped += -v;
      v = 0.0;
    }
  }
  const double s = H.sum();
  if (s > 0.0) {
    H /= s;
  } else {
    H.setConstant(1.0 / static_cast<double>(m * m));
  }
  auto out = recover_pi_T(H);
  out.clamped_mass = clamped;
  return out;
}

std::vector<int> differential_states(const Eigen::MatrixXd& per_cell_probs, double threshold) {
  if (per_cell_probs.rows() != 2) {
    throw ValidationError("differential states are defined for exactly two cell types, got " +
                          std::to_string(per_cell_probs.rows()));
  }
  const auto m = static_cast<int>(per_cell_probs.cols());
  Eigen::VectorXd gap = (per_cell_probs.row(0) - per_cell_probs.row(1)).cwiseAbs().transpose();
  std::vector<int> states;
  for (int h = 0; h < m; ++h) {
    if (gap(h) >= threshold) states.push_back(h);
  }
  std::stable_sort(states.begin(), states.end(),
                   [&](int a, int b) { return gap(a) > gap(b); });
  return states;
}

}  // namespace bhmm

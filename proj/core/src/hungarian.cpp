#include "bhmm/hungarian.hpp"

#include <limits>
#include <string>

#include "bhmm/error.hpp"

namespace bhmm {

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ValidationError("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw ValidationError("hungarian: cost matrix has non-finite entries");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Potentials u (rows), v (columns); p[j] is the row matched to column j, 1-based with 0 as sentinel.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

MatchResult estimation_error(const Eigen::MatrixXd& p_true, const Eigen::MatrixXd& p_est) {
  if (p_true.rows() != p_est.rows() || p_true.cols() != p_est.cols()) {
    throw ValidationError("estimation_error: shape mismatch (" + std::to_string(p_true.rows()) +
                          "x" + std::to_string(p_true.cols()) + " vs " +
                          std::to_string(p_est.rows()) + "x" + std::to_string(p_est.cols()) + ")");
  }
  const auto m = p_true.cols();
  Eigen::MatrixXd cost(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      cost(i, j) = (p_true.col(i) - p_est.col(j)).cwiseAbs().sum();
    }
  }
  MatchResult out;
  out.permutation = hungarian(cost);
  for (Eigen::Index i = 0; i < m; ++i) out.error += cost(i, out.permutation[i]);
  return out;
}

MatchResult estimation_error(const Eigen::VectorXd& p_true, const Eigen::VectorXd& p_est) {
  if (p_true.size() != p_est.size()) {
    throw ValidationError("estimation_error: length mismatch (" + std::to_string(p_true.size()) +
                          " vs " + std::to_string(p_est.size()) + ")");
  }
  return estimation_error(Eigen::MatrixXd(p_true.transpose()), Eigen::MatrixXd(p_est.transpose()));
}

}  // namespace bhmm

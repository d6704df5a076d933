#include "bhmm/linalg.hpp"

#include <algorithm>
#include <sstream>

#include "bhmm/error.hpp"

namespace bhmm {

double rank_cutoff(const Eigen::MatrixXd& a, double sigma_max) {
  return static_cast<double>(std::max(a.rows(), a.cols())) * sigma_max * kRankTolerance;
}

Eigen::MatrixXd truncated_pinv(const Eigen::MatrixXd& a, int rank, const char* what) {
  if (rank < 1 || rank > std::min(a.rows(), a.cols())) {
    std::ostringstream os;
    os << "rank condition violated: " << what << " is " << a.rows() << "x" << a.cols()
       << ", cannot have rank " << rank;
    throw NumericalError(os.str());
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = rank_cutoff(a, s(0));
  if (!(s(rank - 1) > cutoff)) {
    std::ostringstream os;
    os << "rank condition violated: " << what << " singular value " << rank << " is "
       << s(rank - 1) << " (cutoff " << cutoff << ")";
    throw NumericalError(os.str());
  }
  const auto u = svd.matrixU().leftCols(rank);
  const auto v = svd.matrixV().leftCols(rank);
  return v * s.head(rank).cwiseInverse().asDiagonal() * u.transpose();
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Eigen::MatrixXd::Zero(a.cols(), a.rows());
  const double cutoff = rank_cutoff(a, s(0));
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

void canonicalize_signs(Eigen::MatrixXd& u) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0.0) u.col(j) *= -1.0;
  }
}

}  // namespace bhmm

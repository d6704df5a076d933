#pragma once

#include <Eigen/Dense>

namespace bhmm {

/// Relative cutoff below which singular values count as zero:
/// sigma < max(rows, cols) * sigma_max * kRankTolerance.
inline constexpr double kRankTolerance = 1e-10;

double rank_cutoff(const Eigen::MatrixXd& a, double sigma_max);

/// Pseudoinverse restricted to the top `rank` singular triplets. Throws
/// NumericalError("rank condition violated ...") when sigma_rank is below the cutoff.
Eigen::MatrixXd truncated_pinv(const Eigen::MatrixXd& a, int rank, const char* what = "matrix");

/// Full pseudoinverse with the default cutoff.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& a);

/// Flips singular-vector columns so the largest-magnitude entry of each is positive.
void canonicalize_signs(Eigen::MatrixXd& u);

}  // namespace bhmm

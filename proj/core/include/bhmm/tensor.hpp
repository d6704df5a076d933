#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bhmm {

/// Dense third-order tensor, column-major: entry (i, j, k) lives at
/// i + n1 * (j + n2 * k).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int n1, int n2, int n3);
  static Tensor3 cube(int n) { return Tensor3(n, n, n); }

  int dim(int mode) const noexcept { return mode == 0 ? n1_ : mode == 1 ? n2_ : n3_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(int i, int j, int k) noexcept { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const noexcept { return data_[index(i, j, k)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Mode-1 unfolding: n1 x (n2 * n3), column j + n2 * k.
  Eigen::Map<Eigen::MatrixXd> unfold1() { return {data_.data(), n1_, n2_ * n3_}; }
  Eigen::Map<const Eigen::MatrixXd> unfold1() const { return {data_.data(), n1_, n2_ * n3_}; }

  double norm() const;
  double sum() const;

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(double s);

  /// this += weight * a (x) b (x) c
  void add_rank1(double weight, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& c);

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(n1_) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(n2_) * k);
  }

  int n1_ = 0;
  int n2_ = 0;
  int n3_ = 0;
  std::vector<double> data_;
};

/// Multilinear transform: result(a, b, c) = sum_{ijk} T(i, j, k) V1(i, a) V2(j, b) V3(k, c).
Tensor3 multilinear(const Tensor3& t, const Eigen::MatrixXd& v1, const Eigen::MatrixXd& v2,
                    const Eigen::MatrixXd& v3);

/// T(I, v, v): u_i = sum_{jk} T(i, j, k) v_j v_k.
Eigen::VectorXd contract_last_two(const Tensor3& t, const Eigen::VectorXd& v);

/// T(v, v, v).
double contract_all(const Tensor3& t, const Eigen::VectorXd& v);

/// Average over all six index permutations. Requires a cubical tensor.
Tensor3 symmetrize_average(const Tensor3& t);

/// ||T - sym(T)||_F / ||T||_F, zero for the zero tensor.
double relative_asymmetry(const Tensor3& t);

Tensor3 outer(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace bhmm

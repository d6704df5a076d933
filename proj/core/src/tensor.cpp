#include "bhmm/tensor.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace bhmm {

Tensor3::Tensor3(int n1, int n2, int n3)
    : n1_(n1), n2_(n2), n3_(n3),
      data_(static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) *
                static_cast<std::size_t>(n3),
            0.0) {
  if (n1 < 0 || n2 < 0 || n3 < 0) throw std::invalid_argument("negative tensor dimension");
}

double Tensor3::norm() const {
  return Eigen::Map<const Eigen::VectorXd>(data_.data(), static_cast<Eigen::Index>(size()))
      .norm();
}

double Tensor3::sum() const {
  return Eigen::Map<const Eigen::VectorXd>(data_.data(), static_cast<Eigen::Index>(size()))
      .sum();
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  if (n1_ != other.n1_ || n2_ != other.n2_ || n3_ != other.n3_) {
    throw std::invalid_argument("tensor dimension mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  if (n1_ != other.n1_ || n2_ != other.n2_ || n3_ != other.n3_) {
    throw std::invalid_argument("tensor dimension mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

void Tensor3::add_rank1(double weight, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& c) {
  assert(a.size() == n1_ && b.size() == n2_ && c.size() == n3_);
  std::size_t idx = 0;
  for (int k = 0; k < n3_; ++k) {
    for (int j = 0; j < n2_; ++j) {
      const double bc = weight * b(j) * c(k);
      for (int i = 0; i < n1_; ++i) data_[idx++] += a(i) * bc;
    }
  }
}

Tensor3 multilinear(const Tensor3& t, const Eigen::MatrixXd& v1, const Eigen::MatrixXd& v2,
                    const Eigen::MatrixXd& v3) {
  const int n1 = t.dim(0), n2 = t.dim(1), n3 = t.dim(2);
  if (v1.rows() != n1 || v2.rows() != n2 || v3.rows() != n3) {
    throw std::invalid_argument("multilinear: factor rows do not match tensor dimensions");
  }
  const int m1 = static_cast<int>(v1.cols());
  const int m2 = static_cast<int>(v2.cols());
  const int m3 = static_cast<int>(v3.cols());

  // Mode 1: (m1 x n2 n3) = V1^T * unfold1.
  Tensor3 a(m1, n2, n3);
  a.unfold1().noalias() = v1.transpose() * t.unfold1();

  // Mode 2, one frontal slice at a time.
  Tensor3 b(m1, m2, n3);
  for (int k = 0; k < n3; ++k) {
    Eigen::Map<const Eigen::MatrixXd> in(a.data().data() + static_cast<std::size_t>(k) * m1 * n2,
                                         m1, n2);
    Eigen::Map<Eigen::MatrixXd> out(b.data().data() + static_cast<std::size_t>(k) * m1 * m2, m1,
                                    m2);
    out.noalias() = in * v2;
  }

  // Mode 3: view as (m1 m2 x n3).
  Tensor3 c(m1, m2, m3);
  Eigen::Map<const Eigen::MatrixXd> in(b.data().data(), m1 * m2, n3);
  Eigen::Map<Eigen::MatrixXd> out(c.data().data(), m1 * m2, m3);
  out.noalias() = in * v3;
  return c;
}

Eigen::VectorXd contract_last_two(const Tensor3& t, const Eigen::VectorXd& v) {
  const int n = t.dim(0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  const double* p = t.data().data();
  for (int k = 0; k < t.dim(2); ++k) {
    for (int j = 0; j < t.dim(1); ++j) {
      const double w = v(j) * v(k);
      Eigen::Map<const Eigen::VectorXd> col(p, n);
      u.noalias() += w * col;
      p += n;
    }
  }
  return u;
}

double contract_all(const Tensor3& t, const Eigen::VectorXd& v) {
  return v.dot(contract_last_two(t, v));
}

Tensor3 symmetrize_average(const Tensor3& t) {
  const int n = t.dim(0);
  if (t.dim(1) != n || t.dim(2) != n) throw std::invalid_argument("tensor is not cubical");
  Tensor3 s = Tensor3::cube(n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        s(i, j, k) = (t(i, j, k) + t(i, k, j) + t(j, i, k) + t(j, k, i) + t(k, i, j) +
                      t(k, j, i)) /
                     6.0;
      }
    }
  }
  return s;
}

double relative_asymmetry(const Tensor3& t) {
  const double n = t.norm();
  if (n == 0.0) return 0.0;
  Tensor3 diff = t;
  diff -= symmetrize_average(t);
  return diff.norm() / n;
}

Tensor3 outer(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  Tensor3 t(static_cast<int>(a.size()), static_cast<int>(b.size()), static_cast<int>(c.size()));
  t.add_rank1(1.0, a, b, c);
  return t;
}

}  // namespace bhmm

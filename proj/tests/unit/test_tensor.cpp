#include <random>

#include <gtest/gtest.h>

#include "bhmm/tensor.hpp"
#include "oracles.hpp"

using namespace bhmm;

namespace {

Tensor3 random_tensor(int a, int b, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Tensor3 t(a, b, c);
  for (double& v : t.data()) v = g(rng);
  return t;
}

Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  }
  return m;
}

}  // namespace

TEST(Tensor3, ColumnMajorLayoutAndUnfolding) {
  Tensor3 t(2, 3, 4);
  t(1, 2, 3) = 5.0;
  EXPECT_EQ(t.data()[1 + 2 * (2 + 3 * 3)], 5.0);
  EXPECT_EQ(t.unfold1()(1, 2 + 3 * 3), 5.0);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.dim(2), 4);
}

TEST(Tensor3, MultilinearMatchesNaiveSum) {
  std::mt19937_64 rng(1);
  const auto t = random_tensor(3, 4, 5, rng);
  const auto v1 = random_matrix(3, 2, rng);
  const auto v2 = random_matrix(4, 3, rng);
  const auto v3 = random_matrix(5, 2, rng);
  const auto r = multilinear(t, v1, v2, v3);
  ASSERT_EQ(r.dim(0), 2);
  ASSERT_EQ(r.dim(1), 3);
  ASSERT_EQ(r.dim(2), 2);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 4; ++j) {
            for (int k = 0; k < 5; ++k) s += t(i, j, k) * v1(i, a) * v2(j, b) * v3(k, c);
          }
        }
        EXPECT_NEAR(r(a, b, c), s, 1e-12);
      }
    }
  }
  EXPECT_THROW(multilinear(t, v2, v2, v3), std::invalid_argument);
}

TEST(Tensor3, Contractions) {
  std::mt19937_64 rng(2);
  const auto t = random_tensor(4, 4, 4, rng);
  Eigen::VectorXd v = random_matrix(4, 1, rng);
  const auto u = contract_last_two(t, v);
  double all = 0.0;
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) {
      for (int k = 0; k < 4; ++k) s += t(i, j, k) * v(j) * v(k);
    }
    EXPECT_NEAR(u(i), s, 1e-12);
    all += s * v(i);
  }
  EXPECT_NEAR(contract_all(t, v), all, 1e-12);
}

TEST(Tensor3, SymmetrizationAndAsymmetry) {
  std::mt19937_64 rng(3);
  const auto t = random_tensor(3, 3, 3, rng);
  const auto s = symmetrize_average(t);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(s(i, j, k), s(j, i, k), 1e-15);
        EXPECT_NEAR(s(i, j, k), s(k, j, i), 1e-15);
        EXPECT_NEAR(s(i, j, k), s(i, k, j), 1e-15);
      }
    }
  }
  EXPECT_NEAR(relative_asymmetry(s), 0.0, 1e-15);
  EXPECT_GT(relative_asymmetry(t), 0.1);
  EXPECT_EQ(relative_asymmetry(Tensor3::cube(3)), 0.0);
  EXPECT_THROW(symmetrize_average(Tensor3(2, 3, 3)), std::invalid_argument);
}

TEST(Tensor3, RankOneAndArithmetic) {
  const Eigen::Vector2d a(1, 2), b(3, 4), c(5, 6);
  auto t = outer(a, b, c);
  EXPECT_DOUBLE_EQ(t(1, 0, 1), 2 * 3 * 6);
  EXPECT_DOUBLE_EQ(t.sum(), 3.0 * 7.0 * 11.0);
  Tensor3 u = Tensor3::cube(2);
  u.add_rank1(2.0, a, b, c);
  t *= 2.0;
  EXPECT_EQ(t, u);
  u -= t;
  EXPECT_EQ(u.norm(), 0.0);
  u += t;
  EXPECT_EQ(u, t);
  EXPECT_THROW(u += Tensor3::cube(3), std::invalid_argument);
}

#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "bhmm/linalg.hpp"
#include "bhmm/spectral.hpp"
#include "oracles.hpp"

using namespace bhmm;

namespace {

HmmParams chain(const Eigen::MatrixXd& T, const Eigen::VectorXd& pi, const Eigen::MatrixXd& p) {
  HmmParams h;
  h.initial = pi;
  h.transition = T;
  h.meth_probs = p;
  return h;
}

HmmParams two_state_binomial() {
  Eigen::Matrix2d T;
  T << 0.8, 0.3, 0.2, 0.7;
  return chain(T, Eigen::Vector2d(0.35, 0.65), Eigen::RowVector2d(0.2, 0.8));
}

/// Max entry error of est against truth after the best column permutation.
double matched_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est) {
  std::vector<int> perm(truth.cols());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double worst = 0.0;
    for (Eigen::Index h = 0; h < truth.cols(); ++h) {
      worst = std::max(worst, (truth.col(h) - est.col(perm[h])).cwiseAbs().maxCoeff());
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Tensor3 planted(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& V) {
  Tensor3 t = Tensor3::cube(static_cast<int>(V.rows()));
  for (Eigen::Index l = 0; l < lambda.size(); ++l) t.add_rank1(lambda(l), V.col(l), V.col(l), V.col(l));
  return t;
}

/// Largest eigenpair error, matching each planted pair to a recovered one up to sign.
double eigenpair_error(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& V,
                       const Eigenpairs& got) {
  double worst = 0.0;
  std::vector<bool> used(got.values.size(), false);
  for (Eigen::Index l = 0; l < lambda.size(); ++l) {
    double best = 1e300;
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < got.values.size(); ++j) {
      if (used[j]) continue;
      const double e = std::max({std::abs(lambda(l) - got.values(j)),
                                 std::min((V.col(l) - got.vectors.col(j)).norm(),
                                          (V.col(l) + got.vectors.col(j)).norm())});
      if (e < best) {
        best = e;
        arg = j;
      }
    }
    used[arg] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST(Symmetrize, CategoricalHmmGivesSymmetricTensor) {
  Eigen::Matrix2d T;
  T << 0.9, 0.4, 0.1, 0.6;
  Eigen::MatrixXd O(3, 2);  // one-hot features: C columns are emission distributions
  O << 0.7, 0.1, 0.2, 0.3, 0.1, 0.6;
  const auto params = chain(T, Eigen::Vector2d(0.5, 0.5), Eigen::RowVector2d(0.5, 0.5));
  const auto moments = oracle::population_moments(params, O);
  const auto sym = symmetrize(moments, 2);
  EXPECT_LT(sym.asymmetry, 1e-10);
  EXPECT_LT(relative_asymmetry(sym.G), 1e-10);
  // G = sum_h P(h2 = h) o_h^(x3)
  const Eigen::VectorXd marginal2 = T * params.initial;
  const auto want = planted(marginal2, O);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(sym.G.data()[i], want.data()[i], 1e-12);
}

TEST(Symmetrize, ScaledIdentityP13) {
  std::mt19937_64 rng(1);
  const int d = 3;
  MomentSet m;
  m.dim = d;
  m.P13 = Eigen::MatrixXd::Identity(d, d) / d;
  m.P31 = m.P13.transpose();
  m.P23 = oracle::random_orthonormal(d, rng).cwiseAbs();
  m.P32 = m.P23.transpose();
  m.P21 = oracle::random_orthonormal(d, rng).cwiseAbs();
  m.P12 = m.P21.transpose();
  const auto s = symmetrizers(m, d);
  EXPECT_LT((s.S1 - d * m.P23).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s.S3 - d * m.P21).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Symmetrize, RankOneMomentsViolateRankCondition) {
  MomentSet m;
  m.dim = 3;
  for (auto* P : {&m.P12, &m.P21, &m.P13, &m.P31, &m.P23, &m.P32}) {
    *P = Eigen::MatrixXd::Zero(3, 3);
    (*P)(0, 0) = 1.0;
  }
  m.T123 = Tensor3::cube(3);
  m.T123(0, 0, 0) = 1.0;
  try {
    symmetrize(m, 2);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("rank condition violated"), std::string::npos);
  }
  EXPECT_THROW(symmetrizers(m, 4), NumericalError);
}

TEST(Whiten, IdentityJKeepsTensor) {
  std::mt19937_64 rng(2);
  const int d = 3;
  Tensor3 G = Tensor3::cube(d);
  std::normal_distribution<double> g;
  for (double& v : G.data()) v = g(rng);
  const auto I = Eigen::MatrixXd::Identity(d, d);
  const auto w = whiten(G, I, I, d);
  EXPECT_LT((w.whitening.W - I).cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t i = 0; i < G.size(); ++i) EXPECT_NEAR(w.H.data()[i], G.data()[i], 1e-12);
}

TEST(Whiten, DiagonalJ) {
  const Eigen::MatrixXd S3 = Eigen::Vector2d(4.0, 1.0).asDiagonal();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  const auto w = whitening(S3, I, 2);
  const Eigen::MatrixXd want = Eigen::Vector2d(0.5, 1.0).asDiagonal();
  EXPECT_LT((w.W - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(w.singular_values(0), 4.0, 1e-15);
  EXPECT_LT(w.residual, 1e-15);
}

TEST(Whiten, RankDeficientJNamesSigma) {
  Eigen::MatrixXd S3 = Eigen::MatrixXd::Zero(3, 3);
  S3(0, 0) = 1.0;
  try {
    whitening(S3, Eigen::MatrixXd::Identity(3, 3), 2);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("sigma_2"), std::string::npos) << e.what();
  }
}

TEST(Whiten, ExactBinomialMomentsGiveOrthogonalForm) {
  const auto params = two_state_binomial();
  const int D = 8;
  const auto C = oracle::expected_features(params.meth_probs, oracle::fixed_coverage(8), D);
  const auto moments = oracle::population_moments(params, C);
  const auto sym = symmetrize(moments, 2);
  const auto w = whiten(sym.G, sym.S3, moments.P32, 2);
  EXPECT_LT(w.whitening.residual, 1e-6);
  const Eigen::VectorXd marginal2 = params.transition * params.initial;
  const Eigen::MatrixXd WtC = w.whitening.W.transpose() * C;
  const auto want = planted(marginal2, WtC);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(w.H.data()[i], want.data()[i], 1e-8);
  // sqrt(w_h) W^T c_h are orthonormal
  const Eigen::MatrixXd Q = WtC * marginal2.cwiseSqrt().asDiagonal();
  EXPECT_LT((Q.transpose() * Q - Eigen::Matrix2d::Identity()).norm(), 1e-8);
}

TEST(PowerMethod, SingleCanonicalComponent) {
  Tensor3 h = Tensor3::cube(1);
  h(0, 0, 0) = 2.0;
  const auto e = tensor_power_method(h, 1);
  EXPECT_NEAR(e.values(0), 2.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors(0, 0)), 1.0, 1e-15);
}

TEST(PowerMethod, PlantedTwoComponents) {
  std::mt19937_64 rng(3);
  const auto V = oracle::random_orthonormal(2, rng);
  const Eigen::Vector2d lambda(3.0, 1.0);
  const auto e = tensor_power_method(planted(lambda, V), 2);
  EXPECT_LT(eigenpair_error(lambda, V, e), 1e-6);
  EXPECT_NEAR(e.values(0), 3.0, 1e-6);  // largest first
}

TEST(PowerMethod, ZeroTensorHasNoComponent) {
  try {
    tensor_power_method(Tensor3::cube(3), 3);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("no component found"), std::string::npos);
  }
}

TEST(PowerMethod, ConfigValidation) {
  EXPECT_THROW(tensor_power_method(Tensor3(2, 2, 3), 2), ValidationError);
  EXPECT_THROW(tensor_power_method(Tensor3::cube(2), 3), ValidationError);
  EXPECT_THROW(tensor_power_method(Tensor3::cube(2), 1, {0, 1, 0}), ValidationError);
}

TEST(PowerMethodProperty, PlantedOrthogonalTensors) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 1 + trial % 6;
    const auto V = oracle::random_orthonormal(m, rng);
    Eigen::VectorXd lambda(m);
    for (int l = 0; l < m; ++l) lambda(l) = u(rng);
    PowerMethodConfig cfg;
    cfg.seed = rng();
    const auto e = tensor_power_method(planted(lambda, V), m, cfg);
    EXPECT_LT(eigenpair_error(lambda, V, e), 1e-6) << "trial " << trial;
    EXPECT_LT((e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(m, m)).norm(), 1e-6);
    ASSERT_EQ(e.deflation_residuals.size(), static_cast<std::size_t>(m));
    for (int l = 1; l < m; ++l) EXPECT_LE(e.deflation_residuals[l], e.deflation_residuals[l - 1]);
  }
}

TEST(PowerMethodProperty, DeterministicForSeed) {
  std::mt19937_64 rng(5);
  Tensor3 h = Tensor3::cube(4);
  std::normal_distribution<double> g;
  for (double& v : h.data()) v = g(rng);
  h = symmetrize_average(h);
  PowerMethodConfig cfg{30, 10, 77};
  const auto a = tensor_power_method(h, 3, cfg);
  const auto b = tensor_power_method(h, 3, cfg);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.vectors, b.vectors);
  EXPECT_EQ(a.deflation_residuals, b.deflation_residuals);
}

TEST(RecoverC, OrthonormalWhiteningInvertsExactly) {
  std::mt19937_64 rng(6);
  const int m = 3;
  Eigen::MatrixXd C(m, m);
  for (int l = 0; l < m; ++l) C.col(l) = oracle::random_simplex(m, rng);
  WhiteningData wd;
  wd.W = oracle::random_orthonormal(m, rng);
  wd.singular_values = Eigen::VectorXd::Ones(m);
  Eigenpairs eig;
  const Eigen::MatrixXd U = wd.W.transpose() * C;
  eig.values = U.colwise().norm().transpose();
  eig.vectors = U.array().rowwise() / eig.values.transpose().array();
  const auto rc = recover_C(eig, wd, m);
  EXPECT_LT((rc.C - C).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(rc.clamped_mass, 0.0);
  EXPECT_EQ(rc.flipped_columns, 0);
  // a negated eigenvector is sign-fixed back
  eig.vectors.col(1) *= -1.0;
  const auto flipped = recover_C(eig, wd, m);
  EXPECT_EQ(flipped.flipped_columns, 1);
  EXPECT_LT((flipped.C - C).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RecoverC, ClampsAndRenormalizesBlocks) {
  WhiteningData wd;
  wd.W = Eigen::MatrixXd::Identity(4, 1);
  Eigenpairs eig;
  eig.values = Eigen::VectorXd::Ones(1);
  eig.vectors = Eigen::MatrixXd::Ones(1, 1);
  // (W^T)^+ = e1, so C = e1 before normalization: block 2 is all zero
  const auto rc = recover_C(eig, wd, 2);
  EXPECT_EQ(rc.C.col(0), Eigen::Vector4d(1.0, 0.0, 0.5, 0.5));
  EXPECT_THROW(recover_C(eig, wd, 3), ValidationError);
}

TEST(Decompose, ExactBinomialMomentsRecoverC) {
  const auto params = two_state_binomial();
  const int D = 8;
  const auto C = oracle::expected_features(params.meth_probs, oracle::fixed_coverage(8), D);
  const auto result = decompose(oracle::population_moments(params, C), 2);
  EXPECT_LT(matched_error(C, result.C_hat), 1e-4);
  EXPECT_EQ(result.clamped_mass, 0.0);
  EXPECT_LT(result.whitening.residual, 1e-6);
  EXPECT_LT(result.asymmetry, 1e-10);
  const auto& V = result.eigen.vectors;
  EXPECT_LT((V.transpose() * V - Eigen::Matrix2d::Identity()).norm(), 1e-6);
}

TEST(DecomposeProperty, ExactMomentsEndToEnd) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int m = 2 + trial % 3;
    const int cells = 1 + trial % 2;
    Eigen::MatrixXd T(m, m);
    for (int j = 0; j < m; ++j) {
      T.col(j) = 0.5 * Eigen::VectorXd::Unit(m, j) + 0.5 * oracle::random_simplex(m, rng);
    }
    Eigen::MatrixXd p(cells, m);
    for (int k = 0; k < cells; ++k) {
      for (int h = 0; h < m; ++h) p(k, h) = (h + 0.2 + 0.6 * u(rng)) / m;
    }
    const auto params = chain(T, oracle::random_simplex(m, rng), p);
    const int D = 10;
    const auto C = oracle::expected_features(p, oracle::fixed_coverage(40), D);
    const auto moments = oracle::population_moments(params, C);
    PowerMethodConfig cfg;
    cfg.seed = trial;
    const auto result = decompose(moments, m, cfg);
    EXPECT_LT(matched_error(C, result.C_hat), 1e-4) << "trial " << trial;
    EXPECT_LT(result.whitening.residual, 1e-6);
    const auto& r = result.eigen.deflation_residuals;
    for (std::size_t l = 1; l < r.size(); ++l) EXPECT_LE(r[l], r[l - 1]);
    EXPECT_LT(r.back(), 1e-8 * r.front() + 1e-12);
  }
}

TEST(DecomposeProperty, SampledMomentsDeflationIsMonotone) {
  std::mt19937_64 rng(8);
  const auto params = two_state_binomial();
  const auto seq = oracle::sample(params, 20000, oracle::fixed_coverage(20), rng);
  BetaMapTable table(BetaMapConfig{8});
  const auto moments = estimate_moments(seq, table);
  const auto result = decompose(moments, 2);
  const auto& r = result.eigen.deflation_residuals;
  EXPECT_LE(r[1], r[0]);
  for (Eigen::Index l = 0; l < 2; ++l) {
    EXPECT_NEAR(result.C_hat.col(l).sum(), 1.0, 1e-12);
    EXPECT_GE(result.C_hat.col(l).minCoeff(), 0.0);
  }
}

TEST(Linalg, TruncatedPinvAndRank) {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 2, 0, 0;
  const auto p = truncated_pinv(a, 2);
  EXPECT_LT((p * a - Eigen::Matrix2d::Identity()).norm(), 1e-14);
  const auto p1 = truncated_pinv(a, 1);
  EXPECT_NEAR(p1(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(p1(0, 0), 0.0, 1e-15);
  Eigen::MatrixXd r1 = Eigen::MatrixXd::Ones(3, 3);
  EXPECT_THROW(truncated_pinv(r1, 2), NumericalError);
  EXPECT_LT((pinv(r1) - r1 / 9.0).norm(), 1e-14);
}

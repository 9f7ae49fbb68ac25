#include "dnetreg/tensor.hpp"

#include <gtest/gtest.h>

#include "dnetreg/rng.hpp"

using namespace dnetreg;

namespace {

Tensor3 random_tensor3(int n1, int n2, int K, uint64_t seed,
                       bool symmetric = false) {
  Rng rng(seed);
  Tensor3 t(n1, n2, K, symmetric);
  for (auto& v : t.v) v = rng.normal();
  if (symmetric) {
    for (int i = 0; i < n1; ++i)
      for (int j = 0; j < i; ++j)
        for (int k = 0; k < K; ++k) t.at(i, j, k) = t.at(j, i, k);
  }
  return t;
}

CpFactors random_factors(int n, int K, int R, uint64_t seed) {
  Rng rng(seed);
  CpFactors f;
  f.w = Eigen::VectorXd(R);
  f.U1 = Eigen::MatrixXd(n, R);
  f.U3 = Eigen::MatrixXd(K, R);
  for (int r = 0; r < R; ++r) {
    for (int i = 0; i < n; ++i) f.U1(i, r) = rng.normal();
    for (int k = 0; k < K; ++k) f.U3(k, r) = rng.normal();
    f.w[r] = 0.5 + rng.uniform();
    f.U1.col(r).normalize();
    f.U3.col(r).normalize();
  }
  return f;
}

}  // namespace

TEST(Mode3Product, ZeroTensorAnnihilates) {
  Tensor3 B(3, 3, 4);
  Eigen::VectorXd b = Eigen::VectorXd::Random(4);
  EXPECT_EQ(mode3_product(B, b).norm(), 0.0);
}

TEST(Mode3Product, BasisVectorSelectsFrontalSlice) {
  Tensor3 B = random_tensor3(3, 3, 4, 11);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(4);
  e2[1] = 1.0;
  const Eigen::MatrixXd out = mode3_product(B, e2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(out(i, j), B.at(i, j, 1));
}

TEST(Mode3Product, MatchesTripleLoopOracle) {
  Tensor3 B = random_tensor3(2, 2, 3, 7);
  Eigen::VectorXd b(3);
  b << 1.0, 2.0, 3.0;
  const Eigen::MatrixXd out = mode3_product(B, b);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double want = 0.0;
      for (int k = 0; k < 3; ++k) want += b[k] * B.at(i, j, k);
      EXPECT_NEAR(out(i, j), want, 1e-12);
    }
}

TEST(Mode3Product, RejectsLengthMismatch) {
  Tensor3 B(3, 3, 4);
  EXPECT_THROW(mode3_product(B, Eigen::VectorXd::Zero(5)),
               std::invalid_argument);
}

TEST(Mode3Product, LinearInVector) {
  Tensor3 B = random_tensor3(4, 4, 5, 23);
  Rng rng(5);
  Eigen::VectorXd b1(5), b2(5);
  for (int k = 0; k < 5; ++k) {
    b1[k] = rng.normal();
    b2[k] = rng.normal();
  }
  const double a = 1.7;
  const Eigen::MatrixXd lhs = mode3_product(B, a * b1 + b2);
  const Eigen::MatrixXd rhs = a * mode3_product(B, b1) + mode3_product(B, b2);
  EXPECT_LT((lhs - rhs).norm(), 1e-10);
}

TEST(CpReconstruct, UnitRankOne) {
  CpFactors f;
  f.w = Eigen::VectorXd::Ones(1);
  f.U1 = Eigen::MatrixXd::Zero(3, 1);
  f.U1(0, 0) = 1.0;
  f.U3 = Eigen::MatrixXd::Zero(2, 1);
  f.U3(0, 0) = 1.0;
  const Tensor3 T = cp_reconstruct(f);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 2; ++k)
        EXPECT_DOUBLE_EQ(T.at(i, j, k),
                         (i == 0 && j == 0 && k == 0) ? 1.0 : 0.0);
}

TEST(CpReconstruct, NodeColumnSignFlipIsInvisible) {
  CpFactors f = random_factors(5, 3, 2, 42);
  const Tensor3 a = cp_reconstruct(f);
  f.U1.col(1) = -f.U1.col(1);
  const Tensor3 b = cp_reconstruct(f);
  for (size_t q = 0; q < a.v.size(); ++q) EXPECT_DOUBLE_EQ(a.v[q], b.v[q]);
}

TEST(CpReconstruct, MatchesOuterProductOracle) {
  const CpFactors f = random_factors(4, 3, 2, 9);
  const Tensor3 T = cp_reconstruct(f);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 3; ++k) {
        double want = 0.0;
        for (int r = 0; r < 2; ++r)
          want += f.w[r] * f.U1(i, r) * f.U1(j, r) * f.U3(k, r);
        EXPECT_NEAR(T.at(i, j, k), want, 1e-12);
      }
}

TEST(CpReconstruct, OutputExactlySymmetric) {
  const CpFactors f = random_factors(6, 4, 3, 13);
  const Tensor3 T = cp_reconstruct(f);
  EXPECT_TRUE(T.symmetric);
  EXPECT_EQ(T.symmetry_gap(), 0.0);
}

TEST(CpDecompose, RecoversPlantedRankOne) {
  const CpFactors f = random_factors(6, 4, 1, 3);
  const Tensor3 T = cp_reconstruct(f);
  const CpDecomposition d = cp_decompose(T, 1);
  EXPECT_LT(d.reconstruction_error, 1e-8);
}

TEST(CpDecompose, ZeroTensorIsExact) {
  const Tensor3 T(5, 5, 3, true);
  const CpDecomposition d = cp_decompose(T, 1);
  EXPECT_EQ(d.reconstruction_error, 0.0);
  EXPECT_EQ(cp_reconstruct(d.factors).frobenius_norm(), 0.0);
}

TEST(CpDecompose, PlantedLowRankRoundTrip) {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const CpFactors f = random_factors(8, 5, 2, seed);
    const Tensor3 T = cp_reconstruct(f);
    const CpDecomposition d = cp_decompose(T, 2);
    const double rel = d.reconstruction_error / T.frobenius_norm();
    EXPECT_LT(rel, 1e-6) << "seed " << seed;
    // round trip through the factors, measured on the tensor
    const Tensor3 R = cp_reconstruct(d.factors);
    double diff = 0.0;
    for (size_t q = 0; q < T.v.size(); ++q) {
      const double e = R.v[q] - T.v[q];
      diff += e * e;
    }
    EXPECT_LT(std::sqrt(diff) / T.frobenius_norm(), 1e-6);
  }
}

TEST(CpDecompose, ErrorNonIncreasingBySweepCount) {
  // tied-mode sweeps must never raise the reconstruction error; monitored
  // by re-running with growing sweep caps on random symmetric inputs
  for (uint64_t seed : {10u, 20u, 30u, 40u, 50u}) {
    const Tensor3 T = random_tensor3(6, 6, 4, seed, /*symmetric=*/true);
    double prev = std::numeric_limits<double>::infinity();
    for (int sweeps : {1, 2, 4, 8, 16}) {
      const CpDecomposition d = cp_decompose(T, 2, sweeps, 0.0, 0, 0);
      EXPECT_LE(d.reconstruction_error, prev * (1.0 + 1e-12))
          << "seed " << seed << " sweeps " << sweeps;
      prev = d.reconstruction_error;
    }
  }
}

TEST(CpDecompose, RejectsBadInputs) {
  Tensor3 asym(3, 3, 2);
  asym.at(0, 1, 0) = 1.0;  // not mirrored
  EXPECT_THROW(cp_decompose(asym, 1), std::invalid_argument);
  const Tensor3 T = cp_reconstruct(random_factors(4, 3, 1, 5));
  EXPECT_THROW(cp_decompose(T, 0), std::invalid_argument);
  EXPECT_THROW(cp_decompose(T, 4), std::invalid_argument);  // > min(n, K)
}

TEST(CpDecompose, WeightsSortedAndNonnegative) {
  const CpFactors f = random_factors(7, 5, 3, 77);
  const Tensor3 T = cp_reconstruct(f);
  const CpDecomposition d = cp_decompose(T, 3);
  d.factors.validate();
  for (int r = 1; r < 3; ++r) EXPECT_LE(d.factors.w[r], d.factors.w[r - 1]);
}

TEST(FiberGroupNorms, ZeroTensor) {
  const Tensor4 G(4, 3, 2);
  for (const auto& M : fiber_group_norms(G)) EXPECT_EQ(M.norm(), 0.0);
}

TEST(FiberGroupNorms, SingleFiberThreeFourFive) {
  Tensor4 G(4, 2, 1);
  G.at(1, 2, 0, 0) = 3.0;
  G.at(1, 2, 1, 0) = 4.0;
  const auto norms = fiber_group_norms(G);
  EXPECT_DOUBLE_EQ(norms[0](1, 2), 5.0);
  EXPECT_DOUBLE_EQ(norms[0].sum(), 5.0);
}

TEST(FiberGroupNorms, MatchesLoopOracle) {
  Rng rng(99);
  Tensor4 G(4, 3, 2);
  for (auto& v : G.v) v = rng.normal();
  const auto norms = fiber_group_norms(G);
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 4; ++j)
      for (int jp = 0; jp < 4; ++jp) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += G.at(j, jp, k, l) * G.at(j, jp, k, l);
        EXPECT_NEAR(norms[l](j, jp), std::sqrt(s), 1e-12);
      }
}

#include "dnetreg/baselines.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"

using namespace dnetreg;
using dnetreg::testing::random_dataset;
using dnetreg::testing::random_params;

namespace {

// two-sided KS statistic against U(0,1)
double ks_uniform(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double M = static_cast<double>(v.size());
  double ks = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    ks = std::max(ks, std::fabs((i + 1) / M - v[i]));
    ks = std::max(ks, std::fabs(v[i] - i / M));
  }
  return ks;
}

}  // namespace

TEST(EdgeReg, ExactLinearRelationRecovered) {
  // gaussian, noiseless: A_e(i) = 0.4 + 1.7 x_i for one edge
  DynamicNetworkDataset data;
  data.N = 12;
  data.n = 3;
  data.T = 2;
  data.p = 1;
  data.family = Family::kGaussian;
  data.time_grid = {0.0, 1.0};
  Rng rng(3);
  data.X.resize(12, 1);
  for (int i = 0; i < 12; ++i) data.X(i, 0) = rng.normal();
  standardize_columns(data.X);
  data.adjacency.assign(12, std::vector<double>(2 * 9, 0.0));
  for (int i = 0; i < 12; ++i)
    for (int h = 0; h < 2; ++h) {
      const double v = 0.4 + 1.7 * data.X(i, 0);
      data.adj(i, h, 0, 1) = v;
      data.adj(i, h, 1, 0) = v;
    }
  const EdgeRegResult res = edgereg_fit(data);
  EXPECT_NEAR(res.coef_at(0, 1, 0, 0), 0.4, 1e-8);
  EXPECT_NEAR(res.coef_at(0, 1, 0, 1), 1.7, 1e-8);
  EXPECT_LT(res.pval_at(0, 1, 0, 0), 1e-12);
  // mirrored cell identical
  EXPECT_EQ(res.coef_at(1, 0, 0, 1), res.coef_at(0, 1, 0, 1));
}

TEST(EdgeReg, NullSlopePValuesApproximatelyUniform) {
  // covariate plays no role in generation; converged cells' p-values
  // should look uniform
  Rng rng(17);
  DynamicNetworkDataset data =
      random_dataset(200, 12, 8, 1, Family::kBernoulli, rng);
  const EdgeRegResult res = edgereg_fit(data);
  std::vector<double> pv;
  for (int j = 0; j < 12; ++j)
    for (int jp = j + 1; jp < 12; ++jp)
      for (int h = 0; h < 8; ++h)
        if (res.converged_at(j, jp, h)) pv.push_back(res.pval_at(j, jp, h, 0));
  ASSERT_GT(pv.size(), 400u);
  EXPECT_LT(ks_uniform(pv), 0.1);
}

TEST(EdgeReg, ConstantBernoulliEdgeFlagged) {
  Rng rng(19);
  DynamicNetworkDataset data =
      random_dataset(20, 3, 2, 1, Family::kBernoulli, rng);
  for (int i = 0; i < 20; ++i)
    for (int h = 0; h < 2; ++h) {
      data.adj(i, h, 0, 1) = 0.0;
      data.adj(i, h, 1, 0) = 0.0;
    }
  const EdgeRegResult res = edgereg_fit(data);
  EXPECT_FALSE(res.converged_at(0, 1, 0));
  EXPECT_EQ(res.pval_at(0, 1, 0, 0), 1.0);
  // fallback mean stays near zero after the inverse link
  EXPECT_LT(psi_prime(Family::kBernoulli, res.coef_at(0, 1, 0, 0)), 0.05);
}

TEST(EdgeReg, RejectsTooFewSubjectsOrRankDeficiency) {
  Rng rng(23);
  DynamicNetworkDataset data =
      random_dataset(2, 3, 2, 1, Family::kGaussian, rng);
  EXPECT_THROW(edgereg_fit(data), std::invalid_argument);
}

TEST(DEdgeReg, NoiselessGaussianRecovery) {
  Rng rng(29);
  const SplineBasis basis(5, 3);
  ModelParams truth = random_params(5, 5, 2, 1, rng, 0.7);
  DynamicNetworkDataset data = random_dataset(
      8, 5, 12, 1, Family::kGaussian, rng, &truth, &basis, true);
  const DEdgeRegResult res = dedgereg_fit(data, basis);
  EXPECT_EQ(res.n_failed, 0);
  const Tensor3 B0 = cp_reconstruct(truth.baseline);
  for (int j = 0; j < 5; ++j)
    for (int jp = 0; jp < 5; ++jp) {
      if (j == jp) continue;
      for (int k = 0; k < 5; ++k) {
        EXPECT_NEAR(res.coefficients[0].at(j, jp, k), B0.at(j, jp, k), 1e-6);
        EXPECT_NEAR(res.coefficients[1].at(j, jp, k),
                    truth.slopes.at(j, jp, k, 0), 1e-6);
      }
    }
}

TEST(DEdgeReg, NoCovariatesIsPerEdgeSmoothing) {
  Rng rng(31);
  const SplineBasis basis(4, 3);
  DynamicNetworkDataset data =
      random_dataset(6, 4, 20, 0, Family::kGaussian, rng);
  const DEdgeRegResult res = dedgereg_fit(data, basis);
  ASSERT_EQ(res.coefficients.size(), 1u);
  // oracle: per-edge least squares on the basis matrix
  Eigen::MatrixXd Phi(20 * 6, 4);
  Eigen::VectorXd y(20 * 6);
  for (int i = 0; i < 6; ++i)
    for (int h = 0; h < 20; ++h)
      Phi.row(i * 20 + h) = basis.eval(data.time_grid[h]).transpose();
  for (int j = 0; j < 4; ++j)
    for (int jp = j + 1; jp < 4; ++jp) {
      for (int i = 0; i < 6; ++i)
        for (int h = 0; h < 20; ++h) y[i * 20 + h] = data.adj(i, h, j, jp);
      const Eigen::VectorXd beta =
          (Phi.transpose() * Phi).ldlt().solve(Phi.transpose() * y);
      for (int k = 0; k < 4; ++k)
        EXPECT_NEAR(res.coefficients[0].at(j, jp, k), beta[k], 1e-8);
    }
}

TEST(DEdgeReg, RejectsUnderdeterminedDesign) {
  Rng rng(37);
  DynamicNetworkDataset data =
      random_dataset(2, 3, 2, 1, Family::kGaussian, rng);
  const SplineBasis basis(4, 3);
  // N*T = 4 <= K*(p+1) = 8
  EXPECT_THROW(dedgereg_fit(data, basis), std::invalid_argument);
}

TEST(DEdgeReg, SymmetricByConstruction) {
  Rng rng(41);
  const SplineBasis basis(4, 3);
  DynamicNetworkDataset data =
      random_dataset(8, 5, 10, 1, Family::kBernoulli, rng);
  const DEdgeRegResult res = dedgereg_fit(data, basis);
  for (const auto& t : res.coefficients) EXPECT_EQ(t.symmetry_gap(), 0.0);
}

TEST(SelectEdges, AllOnesPVaulesSelectNothing) {
  std::vector<double> P(5 * 5 * 3, 1.0);
  const Eigen::MatrixXi H = select_edges(P, 5, 3, 0.05, Correction::kBonferroni);
  EXPECT_EQ(H.sum(), 0);
}

TEST(SelectEdges, SingleTinyPValueSelected) {
  const int n = 10, T = 5;
  std::vector<double> P(n * n * T, 1.0);
  // cell (2, 7) at h=3, mirrored
  P[(2 * n + 7) * T + 3] = 1e-9;
  P[(7 * n + 2) * T + 3] = 1e-9;
  const Eigen::MatrixXi H = select_edges(P, n, T, 0.05, Correction::kBonferroni);
  EXPECT_EQ(H(2, 7), 1);  // 1e-9 * 500 = 5e-7 <= 0.05
  EXPECT_EQ(H(7, 2), 1);
  EXPECT_EQ(H.sum(), 2);
}

TEST(SelectEdges, AlphaOneSelectsEverything) {
  Rng rng(43);
  const int n = 4, T = 2;
  std::vector<double> P(n * n * T);
  for (auto& v : P) v = rng.uniform();
  const Eigen::MatrixXi H = select_edges(P, n, T, 1.0, Correction::kBonferroni);
  EXPECT_EQ(H.sum(), n * n - n);
}

TEST(SelectEdges, BonferroniNeverLessConservativeThanBH) {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6, T = 4;
    std::vector<double> P(n * n * T);
    for (auto& v : P) v = std::pow(rng.uniform(), 3.0);
    const Eigen::MatrixXi Hb =
        select_edges(P, n, T, 0.05, Correction::kBonferroni);
    const Eigen::MatrixXi Hbh =
        select_edges(P, n, T, 0.05, Correction::kBenjaminiHochberg);
    for (int j = 0; j < n; ++j)
      for (int jp = 0; jp < n; ++jp) EXPECT_LE(Hb(j, jp), Hbh(j, jp));
  }
}

TEST(TprFpr, HandCases) {
  const int n = 10;
  Eigen::MatrixXi H_true = Eigen::MatrixXi::Zero(n, n);
  // 10 true cells (5 symmetric pairs) = n^2 * 0.1
  int placed = 0;
  for (int j = 0; j < n && placed < 5; ++j) {
    H_true(j, j + 1) = H_true(j + 1, j) = 1;
    ++placed;
    ++j;
  }
  ASSERT_EQ(H_true.sum(), 10);
  const double s0 = 0.1;

  auto [tpr1, fpr1] = tpr_fpr(H_true, H_true, s0);
  EXPECT_DOUBLE_EQ(tpr1, 1.0);
  EXPECT_DOUBLE_EQ(fpr1, 0.0);

  const Eigen::MatrixXi zero = Eigen::MatrixXi::Zero(n, n);
  auto [tpr0, fpr0] = tpr_fpr(zero, H_true, s0);
  EXPECT_DOUBLE_EQ(tpr0, 0.0);
  EXPECT_DOUBLE_EQ(fpr0, 0.0);

  Eigen::MatrixXi H = H_true;
  H(8, 3) = 1;
  H(3, 8) = 1;  // 2 extra cells
  auto [tpr2, fpr2] = tpr_fpr(H, H_true, s0);
  EXPECT_DOUBLE_EQ(tpr2, 1.0);
  EXPECT_DOUBLE_EQ(fpr2, 0.2);
  EXPECT_NEAR(fpr_over_negatives(H, H_true, s0), 2.0 / 90.0, 1e-12);

  EXPECT_THROW(tpr_fpr(H, H_true, 0.0), std::invalid_argument);
}

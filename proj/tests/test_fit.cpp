#include "dnetreg/fit.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "dnetreg/baselines.hpp"
#include "test_support.hpp"

using namespace dnetreg;
using dnetreg::testing::random_dataset;
using dnetreg::testing::random_params;

TEST(GroupShrink, HandCases) {
  Tensor4 G(3, 2, 1);
  G.at(0, 1, 0, 0) = G.at(1, 0, 0, 0) = 3.0;
  G.at(0, 1, 1, 0) = G.at(1, 0, 1, 0) = 4.0;
  const Tensor4 S = group_shrink(G, 1.0);  // factor (1 - 1/5) = 0.8
  EXPECT_DOUBLE_EQ(S.at(0, 1, 0, 0), 2.4);
  EXPECT_DOUBLE_EQ(S.at(0, 1, 1, 0), 3.2);
  EXPECT_DOUBLE_EQ(S.at(1, 0, 0, 0), 2.4);

  Tensor4 small(3, 2, 1);
  small.at(0, 2, 0, 0) = small.at(2, 0, 0, 0) = 0.3;
  small.at(0, 2, 1, 0) = small.at(2, 0, 1, 0) = 0.4;  // norm 0.5 < tau
  const Tensor4 Z = group_shrink(small, 1.0);
  EXPECT_EQ(Z.frobenius_norm(), 0.0);
}

TEST(GroupShrink, TauZeroIsIdentity) {
  Rng rng(5);
  Tensor4 G(4, 3, 2);
  for (auto& v : G.v) v = rng.normal();
  const Tensor4 S = group_shrink(G, 0.0);
  for (size_t q = 0; q < G.v.size(); ++q) EXPECT_EQ(S.v[q], G.v[q]);
  EXPECT_THROW(group_shrink(G, -0.1), std::invalid_argument);
}

TEST(GroupShrink, Nonexpansive) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor4 A(4, 3, 1), B(4, 3, 1);
    for (auto& v : A.v) v = rng.normal();
    for (auto& v : B.v) v = rng.normal();
    const double tau = rng.uniform();
    const Tensor4 SA = group_shrink(A, tau), SB = group_shrink(B, tau);
    double d_in = 0.0, d_out = 0.0;
    for (size_t q = 0; q < A.v.size(); ++q) {
      d_in += (A.v[q] - B.v[q]) * (A.v[q] - B.v[q]);
      d_out += (SA.v[q] - SB.v[q]) * (SA.v[q] - SB.v[q]);
    }
    EXPECT_LE(std::sqrt(d_out), std::sqrt(d_in) + 1e-12);
  }
}

TEST(Renormalize, IdempotentOnUnitFactors) {
  Rng rng(7);
  CpFactors f = dnetreg::testing::random_unit_factors(5, 4, 2, rng);
  CpFactors g = f;
  renormalize(g);
  EXPECT_LT((g.w - f.w).norm(), 1e-14);
  EXPECT_LT((g.U1 - f.U1).norm(), 1e-14);
  EXPECT_LT((g.U3 - f.U3).norm(), 1e-14);
}

TEST(Renormalize, AbsorbsScalesIntoWeights) {
  Rng rng(8);
  CpFactors f = dnetreg::testing::random_unit_factors(5, 4, 2, rng);
  CpFactors g = f;
  g.U1.col(0) *= 2.0;
  g.U3.col(0) *= 3.0;
  const Tensor3 before = cp_reconstruct(g);
  renormalize(g);
  EXPECT_NEAR(g.w[0], f.w[0] * 12.0, 1e-12);
  const Tensor3 after = cp_reconstruct(g);
  double diff = 0.0;
  for (size_t q = 0; q < before.v.size(); ++q)
    diff = std::max(diff, std::fabs(before.v[q] - after.v[q]));
  EXPECT_LT(diff, 1e-12);
  g.validate();
}

TEST(Renormalize, NegativeScaleAbsorbedBySign) {
  Rng rng(9);
  CpFactors g = dnetreg::testing::random_unit_factors(4, 3, 2, rng);
  g.U3.col(1) *= -3.0;
  const Tensor3 before = cp_reconstruct(g);
  renormalize(g);
  EXPECT_GT(g.w[1], 0.0);
  const Tensor3 after = cp_reconstruct(g);
  double diff = 0.0;
  for (size_t q = 0; q < before.v.size(); ++q)
    diff = std::max(diff, std::fabs(before.v[q] - after.v[q]));
  EXPECT_LT(diff, 1e-12);
}

TEST(Renormalize, ZeroColumnFreezesComponent) {
  Rng rng(10);
  CpFactors g = dnetreg::testing::random_unit_factors(4, 3, 2, rng);
  g.U1.col(0).setZero();
  renormalize(g);
  EXPECT_EQ(g.w[0], 0.0);
  EXPECT_DOUBLE_EQ(g.U1.col(0).norm(), 1.0);
}

TEST(Fista, MomentumRecurrence) {
  const double h0 = 1.0;
  const double h1 = fista_next_momentum(h0);
  const double h2 = fista_next_momentum(h1);
  EXPECT_NEAR(h1, (1.0 + std::sqrt(5.0)) / 2.0, 1e-15);
  EXPECT_NEAR(h1, 1.6180339887498949, 1e-12);
  EXPECT_NEAR(h2, 2.1935270853310537, 1e-12);
}

namespace {

struct SmallProblem {
  DynamicNetworkDataset data;
  ModelParams params;
  SplineBasis basis;
};

SmallProblem make_problem(int n, int K, int p, int R, int N, int T,
                          Family family, uint64_t seed,
                          double slope_scale = 0.3) {
  Rng rng(seed);
  SmallProblem sp{DynamicNetworkDataset{}, ModelParams{}, SplineBasis(K, 3)};
  sp.params = random_params(n, K, R, p, rng, slope_scale);
  sp.data =
      random_dataset(N, n, T, p, family, rng, &sp.params, &sp.basis);
  return sp;
}

double loss_of(const SmallProblem& sp, const ModelParams& params) {
  return neg_loglik(params, sp.data, sp.basis);
}

}  // namespace

TEST(UpdateFactor, NeverIncreasesLoss) {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u, 10u}) {
    SmallProblem sp = make_problem(6, 4, 1, 2, 6, 8, Family::kBernoulli, seed);
    const double before = loss_of(sp, sp.params);
    ModelParams after = sp.params;
    after.baseline.U1.col(0) =
        update_factor(sp.data, sp.basis, sp.params, 0, true, 10);
    EXPECT_LE(loss_of(sp, after), before + 1e-12) << "seed " << seed;
  }
}

TEST(UpdateFactor, ReducesGradientNorm) {
  for (uint64_t seed : {11u, 12u, 13u, 14u, 15u, 16u, 17u, 18u, 19u, 20u}) {
    SmallProblem sp = make_problem(6, 4, 1, 2, 8, 10, Family::kGaussian, seed);
    const double g_before =
        grad_u1r(sp.params, sp.data, sp.basis, 1).norm();
    ModelParams after = sp.params;
    after.baseline.U1.col(1) =
        update_factor(sp.data, sp.basis, sp.params, 1, true, 15);
    const double g_after = grad_u1r(after, sp.data, sp.basis, 1).norm();
    EXPECT_LT(g_after, g_before) << "seed " << seed;
  }
}

TEST(UpdateFactor, FixedPointStaysPut) {
  // noiseless gaussian data generated from the parameters: the truth is
  // the exact minimizer, so the update must return it unchanged
  Rng rng(21);
  const SplineBasis basis(4, 3);
  ModelParams params = random_params(5, 4, 2, 1, rng);
  DynamicNetworkDataset data = random_dataset(
      8, 5, 10, 1, Family::kGaussian, rng, &params, &basis, true);
  for (bool node_mode : {true, false}) {
    const Eigen::VectorXd u0 =
        node_mode ? params.baseline.U1.col(0) : params.baseline.U3.col(0);
    const Eigen::VectorXd u =
        update_factor(data, basis, params, 0, node_mode, 20);
    EXPECT_LT((u - u0).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Initialize, RecoversNoiselessRankOneBaseline) {
  Rng rng(31);
  const SplineBasis basis(4, 3);
  ModelParams truth;
  truth.baseline = dnetreg::testing::random_unit_factors(6, 4, 1, rng);
  truth.slopes = Tensor4(6, 4, 0);
  DynamicNetworkDataset data = random_dataset(
      10, 6, 12, 0, Family::kGaussian, rng, &truth, &basis, true);
  const ModelParams init = initialize(data, basis, 1);
  const Tensor3 want = cp_reconstruct(truth.baseline);
  const Tensor3 got = cp_reconstruct(init.baseline);
  double diff = 0.0;
  for (size_t q = 0; q < want.v.size(); ++q) {
    const double d = want.v[q] - got.v[q];
    diff += d * d;
  }
  EXPECT_LT(std::sqrt(diff) / want.frobenius_norm(), 1e-4);
  init.validate();
}

TEST(Initialize, AllZeroAdjacencyStaysClipped) {
  DynamicNetworkDataset data;
  data.N = 6;
  data.n = 4;
  data.T = 8;
  data.p = 1;
  data.family = Family::kBernoulli;
  data.time_grid.resize(8);
  for (int h = 0; h < 8; ++h) data.time_grid[h] = h / 7.0;
  Rng rng(33);
  data.X.resize(6, 1);
  for (int i = 0; i < 6; ++i) data.X(i, 0) = rng.normal();
  standardize_columns(data.X);
  data.adjacency.assign(6, std::vector<double>(8 * 16, 0.0));

  const SplineBasis basis(4, 3);
  const ModelParams init = initialize(data, basis, 1);
  init.validate();
  const Tensor3 B0 = cp_reconstruct(init.baseline);
  double mx = 0.0;
  for (int j = 0; j < 4; ++j)
    for (int jp = 0; jp < 4; ++jp) {
      if (j == jp) continue;
      for (int k = 0; k < 4; ++k) mx = std::max(mx, std::fabs(B0.at(j, jp, k)));
    }
  EXPECT_LE(mx, 30.0 + 1e-9);
  // all-zero data drives the logits far negative
  double off_mean = 0.0;
  int cnt = 0;
  for (int j = 0; j < 4; ++j)
    for (int jp = j + 1; jp < 4; ++jp)
      for (int k = 0; k < 4; ++k) {
        off_mean += B0.at(j, jp, k);
        ++cnt;
      }
  EXPECT_LT(off_mean / cnt, -5.0);
}

TEST(Fit, LambdaZeroGaussianMatchesLeastSquaresOracle) {
  // baseline forced to zero weight; FISTA alone must reach the per-edge
  // least-squares spline solution
  Rng rng(41);
  const int n = 4, K = 4, p = 1, N = 6, T = 10;
  const SplineBasis basis(K, 3);
  ModelParams start;
  start.baseline.w = Eigen::VectorXd::Zero(1);
  start.baseline.U1 = Eigen::MatrixXd::Zero(n, 1);
  start.baseline.U1(0, 0) = 1.0;
  start.baseline.U3 = Eigen::MatrixXd::Zero(K, 1);
  start.baseline.U3(0, 0) = 1.0;
  start.slopes = Tensor4(n, K, p);
  DynamicNetworkDataset data =
      random_dataset(N, n, T, p, Family::kGaussian, rng);

  FitOptions opts;
  opts.R = 1;
  opts.lambda = 0.0;
  opts.K = K;
  opts.max_outer_iters = 40;
  opts.fista_max_iters = 4000;
  opts.fista_tol = 1e-14;
  opts.newton_max_iters = 1;  // baseline frozen at weight zero anyway
  const FitResult res = fit(data, opts, &start);

  // closed-form oracle per edge: regress y on z(i,h) = x_i * phi(t_h)
  Eigen::MatrixXd Z(N * T, K);
  for (int i = 0; i < N; ++i)
    for (int h = 0; h < T; ++h)
      Z.row(i * T + h) = data.X(i, 0) * basis.eval(data.time_grid[h]).transpose();
  const Eigen::MatrixXd G = Z.transpose() * Z;
  for (int j = 0; j < n; ++j)
    for (int jp = j + 1; jp < n; ++jp) {
      Eigen::VectorXd y(N * T);
      for (int i = 0; i < N; ++i)
        for (int h = 0; h < T; ++h) y[i * T + h] = data.adj(i, h, j, jp);
      const Eigen::VectorXd beta = G.ldlt().solve(Z.transpose() * y);
      for (int k = 0; k < K; ++k)
        EXPECT_NEAR(res.params.slopes.at(j, jp, k, 0), beta[k], 1e-6)
            << "edge " << j << "," << jp << " k=" << k;
    }
}

TEST(Fit, HugeLambdaZeroesAllSlopes) {
  SmallProblem sp = make_problem(5, 4, 1, 1, 8, 10, Family::kBernoulli, 43);
  FitOptions opts;
  opts.R = 1;
  opts.lambda = 1e4;
  opts.K = 4;
  opts.max_outer_iters = 5;
  opts.newton_max_iters = 3;
  const FitResult res = fit(sp.data, opts);
  EXPECT_TRUE(res.support.empty());
  EXPECT_EQ(res.params.slopes.nonzero_count(), 0);
}

TEST(Fit, NoCovariatesReducesToBaselineOnly) {
  SmallProblem sp = make_problem(5, 4, 0, 2, 8, 10, Family::kBernoulli, 47);
  FitOptions opts;
  opts.R = 2;
  opts.lambda = 0.5;
  opts.K = 4;
  opts.max_outer_iters = 8;
  opts.newton_max_iters = 5;
  const FitResult res = fit(sp.data, opts);
  EXPECT_EQ(res.params.slopes.p, 0);
  EXPECT_TRUE(res.support.empty());
  for (size_t i = 1; i < res.objective_trace.size(); ++i)
    EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1] + 1e-10);
}

TEST(Fit, ObjectiveTraceNonIncreasing) {
  for (uint64_t seed : {51u, 52u, 53u}) {
    SmallProblem sp =
        make_problem(6, 4, 1, 2, 10, 12, Family::kBernoulli, seed, 0.6);
    FitOptions opts;
    opts.R = 2;
    opts.lambda = 0.02;
    opts.K = 4;
    opts.max_outer_iters = 12;
    opts.newton_max_iters = 6;
    opts.fista_max_iters = 60;
    const FitResult res = fit(sp.data, opts);
    ASSERT_GE(res.objective_trace.size(), 2u);
    for (size_t i = 1; i < res.objective_trace.size(); ++i)
      EXPECT_LE(res.objective_trace[i], res.objective_trace[i - 1] + 1e-10)
          << "seed " << seed << " step " << i;
  }
}

TEST(Fit, DeterministicTraces) {
  SmallProblem sp = make_problem(5, 4, 1, 1, 8, 10, Family::kBernoulli, 61);
  FitOptions opts;
  opts.R = 1;
  opts.lambda = 0.05;
  opts.K = 4;
  opts.max_outer_iters = 6;
  opts.newton_max_iters = 4;
  opts.seed = 99;
  const FitResult a = fit(sp.data, opts);
  const FitResult b = fit(sp.data, opts);
  ASSERT_EQ(a.objective_trace.size(), b.objective_trace.size());
  for (size_t i = 0; i < a.objective_trace.size(); ++i)
    EXPECT_EQ(a.objective_trace[i], b.objective_trace[i]);
  for (size_t q = 0; q < a.params.slopes.v.size(); ++q)
    EXPECT_EQ(a.params.slopes.v[q], b.params.slopes.v[q]);
}

TEST(Fit, SupportMatchesNonzeroFibers) {
  SmallProblem sp = make_problem(6, 4, 1, 1, 10, 12, Family::kBernoulli, 63,
                                 0.8);
  FitOptions opts;
  opts.R = 1;
  opts.lambda = 0.05;
  opts.K = 4;
  opts.max_outer_iters = 8;
  opts.newton_max_iters = 4;
  const FitResult res = fit(sp.data, opts);
  const auto norms = fiber_group_norms(res.params.slopes);
  int nonzero = 0;
  for (int j = 0; j < 6; ++j)
    for (int jp = j + 1; jp < 6; ++jp) nonzero += norms[0](j, jp) > 0.0;
  EXPECT_EQ(static_cast<int>(res.support.size()), nonzero);
}

TEST(Ebic, ClosedFormPieces) {
  DynamicNetworkDataset data;
  data.n = 10;
  data.N = 20;
  data.T = 15;
  data.p = 1;
  const int K = 8, R = 2;
  const double bracket = std::log(10.0 * 10 * 20 * 15 / 2.0) +
                         std::log(10.0 * 10 * K * 2 / 2.0);
  // zero slopes: complexity reduces to R (n + K)
  EXPECT_NEAR(ebic_value(1.5, data, K, R, 0),
              20 * 1.5 + bracket * R * (10 + K), 1e-10);
  // one extra nonzero symmetric fiber pair = 2K entries = K complexity
  const double a = ebic_value(1.5, data, K, R, 4 * K);
  const double b = ebic_value(1.5, data, K, R, 2 * K);
  EXPECT_NEAR(a - b, bracket * K, 1e-10);
}

TEST(Tune, SingletonGridReturnsThatPair) {
  SmallProblem sp = make_problem(5, 4, 1, 1, 8, 10, Family::kBernoulli, 71);
  FitOptions opts;
  opts.K = 4;
  opts.max_outer_iters = 4;
  opts.newton_max_iters = 3;
  const TuneResult tr = tune(sp.data, {1}, {0.05}, opts);
  EXPECT_EQ(tr.best_R, 1);
  EXPECT_DOUBLE_EQ(tr.best_lambda, 0.05);
  ASSERT_EQ(tr.table.size(), 1u);
  EXPECT_TRUE(tr.table[0].ok);
}

TEST(Tune, HugeLambdaColumnHasNoSupport) {
  SmallProblem sp = make_problem(5, 4, 1, 1, 8, 10, Family::kBernoulli, 73);
  FitOptions opts;
  opts.K = 4;
  opts.max_outer_iters = 4;
  opts.newton_max_iters = 3;
  const TuneResult tr = tune(sp.data, {1, 2}, {1e4, 0.05}, opts);
  for (const auto& cell : tr.table)
    if (cell.lambda == 1e4 && cell.ok) EXPECT_EQ(cell.support_size, 0);
  EXPECT_THROW(tune(sp.data, {}, {0.1}, opts), std::invalid_argument);
}

#include "dnetreg/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "dnetreg/rng.hpp"
#include "dnetreg/simulation.hpp"

using namespace dnetreg;

TEST(SlidingWindows, PaperGeometryGivesFortySeven) {
  Rng rng(1);
  Eigen::MatrixXd signal(68, 263);
  for (long i = 0; i < signal.size(); ++i)
    signal(i / 263, i % 263) = rng.normal();
  const SlidingWindowResult res = sliding_windows(signal, 30, 5);
  EXPECT_EQ(res.correlations.size(), 47u);
  EXPECT_EQ(res.n_flagged, 0);
}

TEST(SlidingWindows, CountMatchesClosedForm) {
  Rng rng(2);
  for (auto [S, window, stride] :
       {std::tuple{40, 10, 3}, {40, 40, 1}, {100, 30, 7}, {13, 2, 1}}) {
    Eigen::MatrixXd signal(4, S);
    for (long i = 0; i < signal.size(); ++i)
      signal(i % 4, i / 4) = rng.normal();
    const auto res = sliding_windows(signal, window, stride);
    EXPECT_EQ(static_cast<int>(res.correlations.size()),
              (S - window) / stride + 1);
  }
}

TEST(SlidingWindows, IdenticalRowsCorrelateToOne) {
  Rng rng(3);
  Eigen::MatrixXd signal(3, 50);
  for (int s = 0; s < 50; ++s) signal(0, s) = rng.normal();
  signal.row(1) = signal.row(0);
  for (int s = 0; s < 50; ++s) signal(2, s) = rng.normal();
  const auto res = sliding_windows(signal, 10, 5);
  for (const auto& C : res.correlations) EXPECT_NEAR(C(0, 1), 1.0, 1e-12);
}

TEST(SlidingWindows, FullWindowMatchesDirectPearson) {
  Rng rng(4);
  const int n = 5, S = 40;
  Eigen::MatrixXd signal(n, S);
  for (long i = 0; i < signal.size(); ++i)
    signal(i % n, i / n) = rng.normal();
  const auto res = sliding_windows(signal, S, 1);
  ASSERT_EQ(res.correlations.size(), 1u);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double ma = signal.row(a).mean(), mb = signal.row(b).mean();
      double num = 0, va = 0, vb = 0;
      for (int s = 0; s < S; ++s) {
        num += (signal(a, s) - ma) * (signal(b, s) - mb);
        va += (signal(a, s) - ma) * (signal(a, s) - ma);
        vb += (signal(b, s) - mb) * (signal(b, s) - mb);
      }
      const double want = a == b ? 1.0 : num / std::sqrt(va * vb);
      EXPECT_NEAR(res.correlations[0](a, b), want, 1e-12);
    }
}

TEST(SlidingWindows, FlatRegionFlagged) {
  Eigen::MatrixXd signal = Eigen::MatrixXd::Zero(3, 20);
  Rng rng(5);
  for (int s = 0; s < 20; ++s) signal(0, s) = rng.normal();
  for (int s = 0; s < 20; ++s) signal(1, s) = rng.normal();
  // row 2 constant
  const auto res = sliding_windows(signal, 10, 10);
  EXPECT_GT(res.n_flagged, 0);
  for (const auto& C : res.correlations) {
    EXPECT_EQ(C(0, 2), 0.0);
    EXPECT_EQ(C(2, 2), 1.0);
  }
}

TEST(Binarize, IdentityAndBoundary) {
  EXPECT_EQ(binarize(Eigen::MatrixXd::Identity(4, 4), 0.5).sum(), 0);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(3, 3);
  C(0, 1) = C(1, 0) = 0.5;   // exactly tau: strict comparison keeps 0
  C(0, 2) = C(2, 0) = 0.51;  // above
  const Eigen::MatrixXi A = binarize(C, 0.5);
  EXPECT_EQ(A(0, 1), 0);
  EXPECT_EQ(A(0, 2), 1);
  EXPECT_EQ(A.sum(), 2);
  EXPECT_THROW(binarize(C, 1.0), std::invalid_argument);
}

TEST(Binarize, DensityMatchesCountOracleAndMonotone) {
  Rng rng(6);
  const int n = 12;
  Eigen::MatrixXd C(n, n);
  for (int j = 0; j < n; ++j) {
    C(j, j) = 1.0;
    for (int jp = j + 1; jp < n; ++jp)
      C(j, jp) = C(jp, j) = 2.0 * rng.uniform() - 1.0;
  }
  int prev = n * n;
  for (double tau : {-0.5, 0.0, 0.3, 0.6, 0.9}) {
    const Eigen::MatrixXi A = binarize(C, tau);
    int count = 0;
    for (int j = 0; j < n; ++j)
      for (int jp = 0; jp < n; ++jp)
        count += (j != jp && C(j, jp) > tau) ? 1 : 0;
    EXPECT_EQ(A.sum(), count);
    EXPECT_LE(A.sum(), prev);
    prev = A.sum();
  }
}

TEST(ClusterRegions, RecoversPlantedBlocks) {
  const int n = 18, k = 3;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Rng rng(7);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp) {
      const bool same = (j / 6) == (jp / 6);
      M(j, jp) = (same ? 1.0 : 0.05) + 0.01 * rng.normal();
    }
  M = ((M + M.transpose()) / 2.0).eval();
  const std::vector<int> labels = cluster_regions(M, k, 3, 11);
  // exact block recovery up to relabeling
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp)
      EXPECT_EQ(labels[j] == labels[jp], (j / 6) == (jp / 6))
          << j << " vs " << jp;
}

TEST(ClusterRegions, ValidatesArguments) {
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(5, 5);
  EXPECT_THROW(cluster_regions(M, 1, 2, 0), std::invalid_argument);
  EXPECT_THROW(cluster_regions(M, 6, 2, 0), std::invalid_argument);
  EXPECT_THROW(cluster_regions(M, 2, 9, 0), std::invalid_argument);
}

TEST(ClusterRegions, DegenerateIdenticalRowsStillLabel) {
  const Eigen::MatrixXd M = Eigen::MatrixXd::Ones(6, 6);
  const std::vector<int> labels = cluster_regions(M, 2, 2, 3);
  EXPECT_EQ(labels.size(), 6u);
  for (int v : labels) {
    EXPECT_GE(v, 0);
    EXPECT_LT(v, 2);
  }
}

TEST(ClusterRegions, DeterministicGivenSeed) {
  Rng rng(8);
  Eigen::MatrixXd M(10, 10);
  for (int j = 0; j < 10; ++j)
    for (int jp = j; jp < 10; ++jp) M(j, jp) = M(jp, j) = rng.normal();
  EXPECT_EQ(cluster_regions(M, 3, 4, 17), cluster_regions(M, 3, 4, 17));
}

TEST(GoiDistance, HandCases) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(5, 5);
  GoiSpec spec;
  spec.name = "pairs";
  spec.kind = GoiSpec::Kind::kPairs;
  spec.pairs = {{0, 1}, {1, 2}, {3, 4}};
  const GoiValue zero = goi_distance(D, spec);
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_TRUE(zero.empty);

  D(0, 1) = 1.0;
  D(1, 2) = 2.0;
  D(3, 4) = 3.0;
  const GoiValue v = goi_distance(D, spec);
  EXPECT_DOUBLE_EQ(v.value, 2.0);
  EXPECT_FALSE(v.empty);
}

TEST(GoiDistance, BetweenCommunitiesMatchesEnumeration) {
  Rng rng(9);
  const int n = 8;
  Eigen::MatrixXd D(n, n);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp) D(j, jp) = j == jp ? 0.0 : rng.uniform();
  GoiSpec spec;
  spec.kind = GoiSpec::Kind::kBetween;
  spec.nodes_a = {0, 1, 2};
  spec.nodes_b = {5, 6};
  const GoiValue v = goi_distance(D, spec);
  double sum = 0.0;
  int cnt = 0;
  for (int a : spec.nodes_a)
    for (int b : spec.nodes_b) {
      sum += D(a, b) + D(b, a);
      cnt += (D(a, b) > 0) + (D(b, a) > 0);
    }
  EXPECT_NEAR(v.value, sum / cnt, 1e-12);
}

namespace {

// small two-group population for the mechanics tests
std::pair<DynamicNetworkDataset, std::vector<int>> two_group_data(
    bool different, uint64_t seed) {
  SimConfig cfg;
  cfg.n = 8;
  cfg.N = 12;
  cfg.T = 10;
  cfg.K_gen = 4;
  cfg.R = 1;
  cfg.s0 = 0.15;
  cfg.seed = seed;
  auto [da, ta] = generate(cfg);
  cfg.seed = different ? seed + 1000 : seed;
  auto [db, tb] = generate(cfg);

  DynamicNetworkDataset all;
  all.N = da.N + db.N;
  all.n = da.n;
  all.T = da.T;
  all.p = da.p;
  all.family = da.family;
  all.time_grid = da.time_grid;
  all.X.resize(all.N, all.p);
  all.X << da.X, db.X;
  standardize_columns(all.X);
  all.adjacency = da.adjacency;
  all.adjacency.insert(all.adjacency.end(), db.adjacency.begin(),
                       db.adjacency.end());
  std::vector<int> labels(all.N, 0);
  for (int i = da.N; i < all.N; ++i) labels[i] = 1;
  return {std::move(all), std::move(labels)};
}

FitOptions tiny_fit_options() {
  FitOptions opts;
  opts.R = 1;
  opts.lambda = 0.05;
  opts.K = 4;
  opts.max_outer_iters = 3;
  opts.newton_max_iters = 2;
  opts.fista_max_iters = 20;
  opts.seed = 5;
  return opts;
}

}  // namespace

TEST(PermutationTest, MechanicsAndShapes) {
  auto [data, labels] = two_group_data(false, 31);
  const PermutationReport report =
      permutation_test(data, labels, 6, tiny_fit_options(), 0.95);
  EXPECT_EQ(report.D_obs.rows(), 8);
  EXPECT_EQ(static_cast<int>(report.D_per.size()) + report.n_dropped, 6);
  EXPECT_EQ(report.S_flag.diagonal().sum(), 0);
  for (int j = 0; j < 8; ++j)
    for (int jp = 0; jp < 8; ++jp) {
      EXPECT_NEAR(report.D_obs(j, jp), report.D_obs(jp, j), 1e-12);
      EXPECT_GE(report.D_obs(j, jp), 0.0);
    }
}

TEST(PermutationTest, SinglePermutationBoundary) {
  auto [data, labels] = two_group_data(true, 37);
  const PermutationReport report =
      permutation_test(data, labels, 1, tiny_fit_options(), 1.0);
  // with one permutation and quantile 1, a cell flags iff observed
  // strictly beats that single draw
  for (int j = 0; j < 8; ++j)
    for (int jp = 0; jp < 8; ++jp) {
      if (j == jp) continue;
      const int want = report.D_obs(j, jp) > report.D_per[0](j, jp) ? 1 : 0;
      EXPECT_EQ(report.S_flag(j, jp), want);
    }
}

TEST(PermutationTest, ValidatesInputs) {
  auto [data, labels] = two_group_data(false, 41);
  EXPECT_THROW(permutation_test(data, {0, 1}, 4, tiny_fit_options(), 0.95),
               std::invalid_argument);
  std::vector<int> all_same(data.N, 0);
  EXPECT_THROW(permutation_test(data, all_same, 4, tiny_fit_options(), 0.95),
               std::invalid_argument);
}

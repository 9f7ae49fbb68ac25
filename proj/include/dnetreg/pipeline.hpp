#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dnetreg/dataset.hpp"
#include "dnetreg/fit.hpp"

namespace dnetreg {

/// Pearson correlation matrices over sliding windows of a region-by-scan
/// signal matrix. T = floor((S - window) / stride) + 1 windows; a
/// zero-variance region gets correlation 0 with all partners and is
/// counted in n_flagged.
struct SlidingWindowResult {
  std::vector<Eigen::MatrixXd> correlations;  // each n x n, diagonal 1
  int n_flagged = 0;
};
SlidingWindowResult sliding_windows(const Eigen::MatrixXd& signal, int window,
                                    int stride);

/// Strict threshold: A[j][j'] = 1 iff C(j, j') > tau, diagonal forced 0.
Eigen::MatrixXi binarize(const Eigen::MatrixXd& C, double tau);

/// K-means on the SVD embedding of a symmetric connectivity matrix:
/// rows of U[:, :embed_dim] * diag(sigma) are the features; k-means++
/// seeding, 20 restarts, best within-cluster sum kept.
std::vector<int> cluster_regions(const Eigen::MatrixXd& M, int k,
                                 int embed_dim, uint64_t seed);

/// Graph-of-interest cell sets for averaging distance matrices.
struct GoiSpec {
  enum class Kind { kWithin, kBetween, kPairs };
  std::string name;
  Kind kind = Kind::kWithin;
  std::vector<int> nodes_a;  // within: the node set; between: side A
  std::vector<int> nodes_b;  // between: side B
  std::vector<std::pair<int, int>> pairs;  // explicit cell list

  std::vector<std::pair<int, int>> cells(int n) const;
};

struct GoiValue {
  std::string name;
  double value = 0.0;
  bool empty = false;  // no strictly positive cell in the set
};

/// Mean of D over the set's cells with strictly positive D (the sum runs
/// over all set cells; the count over positive ones). Zero positives
/// gives 0 with the empty flag set.
GoiValue goi_distance(const Eigen::MatrixXd& D, const GoiSpec& spec);

struct PermutationReport {
  Eigen::MatrixXd D_obs;       // fiber distance of group-wise slope fits
  Eigen::MatrixXd D_per_mean;  // mean over permutations
  Eigen::MatrixXi S_flag;
  std::vector<Eigen::MatrixXd> D_per;  // one per kept permutation
  int n_dropped = 0;
  std::vector<GoiValue> goi_obs;
  std::vector<std::vector<GoiValue>> goi_per;  // per permutation
};

/// Fits the model separately per group (observed labels), then per label
/// permutation, and flags cells where the observed group difference
/// exceeds the permuted one in at least quantile * n_perm permutations.
/// Permutations preserve the observed group sizes. A failed permutation
/// fit is dropped; more than 20% drops aborts.
PermutationReport permutation_test(const DynamicNetworkDataset& data,
                                   const std::vector<int>& labels, int n_perm,
                                   const FitOptions& opts, double quantile,
                                   const std::vector<GoiSpec>& gois = {});

}  // namespace dnetreg

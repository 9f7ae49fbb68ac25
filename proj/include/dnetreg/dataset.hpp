#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dnetreg/family.hpp"

namespace dnetreg {

/// A population of dynamic networks: N subjects, each observed as T
/// symmetric n x n adjacency matrices on a common time grid in [0,1],
/// plus a standardized N x p covariate matrix.
struct DynamicNetworkDataset {
  int N = 0, n = 0, T = 0, p = 0;
  Family family = Family::kBernoulli;
  std::vector<double> time_grid;  // length T, values in [0,1]
  Eigen::MatrixXd X;              // N x p, column-standardized

  /// adjacency[i] holds T stacked row-major n x n matrices.
  std::vector<std::vector<double>> adjacency;

  double adj(int i, int h, int j, int jp) const {
    return adjacency[i][(static_cast<size_t>(h) * n + j) * n + jp];
  }
  double& adj(int i, int h, int j, int jp) {
    return adjacency[i][(static_cast<size_t>(h) * n + j) * n + jp];
  }

  /// Subject subset (covariates re-standardized within the subset).
  DynamicNetworkDataset subset(const std::vector<int>& subjects) const;

  /// Throws with a precise message on any violated invariant: shape
  /// mismatches, asymmetry, nonzero diagonal, family-inadmissible edge
  /// values, off-grid times, or non-standardized covariate columns.
  void validate() const;
};

/// In-place column standardization to mean 0, sample sd 1 (n-1 in the
/// denominator). A constant column is rejected.
void standardize_columns(Eigen::MatrixXd& X);

}  // namespace dnetreg

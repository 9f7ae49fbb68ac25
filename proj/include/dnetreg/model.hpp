#pragma once

#include <Eigen/Dense>

#include "dnetreg/dataset.hpp"
#include "dnetreg/spline.hpp"
#include "dnetreg/tensor.hpp"

namespace dnetreg {

/// Full parameter set: a low-rank symmetric baseline tensor (as CP
/// factors) plus one slope tensor per covariate with symmetric slices.
struct ModelParams {
  CpFactors baseline;
  Tensor4 slopes;  // n x n x K x p

  int n() const { return baseline.n(); }
  int K() const { return baseline.K(); }
  int p() const { return slopes.p; }
  void validate() const;
};

/// eta(x, t) = B0 x3 phi(t) + sum_l x_l (B_l x3 phi(t)), assembled
/// straight from the reconstructed tensors. Symmetric output.
Eigen::MatrixXd linear_predictor(const ModelParams& params,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& phi_t);

/// Negative log-likelihood, up to the family's constant term:
/// -(1/N) sum_i sum_{j<j'} sum_h [A eta - psi(eta)]. Each unordered pair
/// counts once and the diagonal is excluded. Slope tensors enter through
/// their symmetric part, so mildly asymmetric inputs are well-defined
/// (needed by finite-difference checks).
double neg_loglik(const ModelParams& params, const DynamicNetworkDataset& data,
                  const SplineBasis& basis);

/// Group-lasso penalty over ordered pairs: sum_l sum_{j != j'}
/// ||G[j,j',.,l]||_2. Symmetric slices make each unordered pair count
/// twice; the diagonal is excluded.
double penalty(const Tensor4& G);

/// Gradients of neg_loglik. grad_gamma returns a tensor with symmetric
/// slices: each mirrored entry carries half the derivative of the shared
/// packed coefficient, matching entrywise finite differences of
/// neg_loglik on the raw storage.
Eigen::VectorXd grad_u1r(const ModelParams& params,
                         const DynamicNetworkDataset& data,
                         const SplineBasis& basis, int r);
Eigen::VectorXd grad_u3r(const ModelParams& params,
                         const DynamicNetworkDataset& data,
                         const SplineBasis& basis, int r);
Tensor4 grad_gamma(const ModelParams& params, const DynamicNetworkDataset& data,
                   const SplineBasis& basis);

}  // namespace dnetreg

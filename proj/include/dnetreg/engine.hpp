#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "dnetreg/dataset.hpp"
#include "dnetreg/spline.hpp"
#include "dnetreg/tensor.hpp"

namespace dnetreg {

/// Packed evaluation engine for the negative log-likelihood and its
/// gradients. Edges live in a packed upper-triangle layout (one slot per
/// unordered pair), adjacency is re-laid-out time-major, and the inner
/// loops run on contiguous arrays so the cumulant kernels vectorize.
///
/// Conventions, fixed here and relied on everywhere else:
///  - the likelihood sums each unordered pair once (j < j');
///  - slope tensors enter through their symmetric part, so the packed
///    coefficient of pair (j, j') is (G[j,j',k,l] + G[j',j,k,l]) / 2;
///  - packed slope gradients are derivatives with respect to the packed
///    coefficients; the order-4 tensor gradient returned to callers puts
///    half that value on each of the two mirrored entries.
class LikelihoodEngine {
 public:
  LikelihoodEngine(const DynamicNetworkDataset& data, const SplineBasis& basis);

  int n() const { return n_; }
  int m() const { return m_; }  // number of unordered pairs
  int T() const { return T_; }
  int K() const { return K_; }
  int p() const { return p_; }
  int N() const { return N_; }
  Family family() const { return family_; }
  const Eigen::MatrixXd& phi() const { return Phi_; }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  const Eigen::MatrixXd& covariates() const { return X_; }

  /// Packed slope layout: gamma[(l*m + e)*K + k].
  std::vector<double> pack_gamma(const Tensor4& G) const;
  Tensor4 unpack_gamma(const std::vector<double>& gamma) const;

  /// Baseline contribution M0[h*m + e] for the current factors.
  std::vector<double> build_m0(const CpFactors& f) const;
  /// Covariate-slice contribution C[(l*T + h)*m + e].
  std::vector<double> build_c(const std::vector<double>& gamma) const;

  /// Negative log-likelihood (j < j' convention, scaled by 1/N).
  double loss(const std::vector<double>& M0, const std::vector<double>& C) const;

  /// Loss plus rsum[h*m + e] = sum_i residual_i(h, e); feeds factor grads.
  double loss_rsum(const std::vector<double>& M0, const std::vector<double>& C,
                   std::vector<double>& rsum) const;

  /// Loss plus S[(h*p + l)*m + e] = sum_i x_il residual_i(h, e).
  double loss_xres(const std::vector<double>& M0, const std::vector<double>& C,
                   std::vector<double>& S) const;

  /// d loss / d u1r (node_mode) or d u3r, assembled from an rsum buffer.
  Eigen::VectorXd grad_factor(const CpFactors& f, int r, bool node_mode,
                              const std::vector<double>& rsum) const;

  /// Packed d loss / d gamma from an S buffer.
  std::vector<double> grad_gamma_packed(const std::vector<double>& S) const;

  /// Group penalty of the packed slopes under the ordered-pair sum
  /// (each unordered fiber counts twice).
  double penalty_packed(const std::vector<double>& gamma) const;

  /// Largest |eta| over all subjects/times/pairs; feeds the poisson
  /// curvature bound.
  double max_abs_eta(const std::vector<double>& M0,
                     const std::vector<double>& C) const;

  double lambda_max_xtx_over_n() const;
  double max_phi_row_sqnorm() const;

 private:
  template <int Mode>
  double sweep(const std::vector<double>& M0, const std::vector<double>& C,
               std::vector<double>* out) const;

  int N_, n_, T_, K_, p_, m_;
  Family family_;
  Eigen::MatrixXd Phi_;  // T x K
  Eigen::MatrixXd X_;    // N x p
  std::vector<std::pair<int, int>> pairs_;
  std::vector<double> A_;  // [h][i][e] packed responses
};

}  // namespace dnetreg

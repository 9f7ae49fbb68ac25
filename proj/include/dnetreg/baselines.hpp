#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dnetreg/dataset.hpp"
#include "dnetreg/spline.hpp"
#include "dnetreg/tensor.hpp"

namespace dnetreg {

/// Element-wise GLMs at each time point: one (p+1)-parameter fit per
/// unordered edge per time, mirrored into symmetric arrays.
struct EdgeRegResult {
  int n = 0, T = 0, p = 0;
  /// Coefficients, ((j*n + j')*T + h)*(p+1) + c with c=0 the intercept.
  std::vector<double> coef;
  /// Wald p-values for the slopes, ((j*n + j')*T + h)*p + l; diagonal
  /// cells and non-converged fits hold 1.
  std::vector<double> pval;
  /// 1 where the cell's fit converged.
  std::vector<uint8_t> converged;

  double coef_at(int j, int jp, int h, int c) const {
    return coef[(static_cast<size_t>(j) * n + jp) * T * (p + 1) +
                static_cast<size_t>(h) * (p + 1) + c];
  }
  double pval_at(int j, int jp, int h, int l) const {
    return pval[(static_cast<size_t>(j) * n + jp) * T * p +
                static_cast<size_t>(h) * p + l];
  }
  bool converged_at(int j, int jp, int h) const {
    return converged[(static_cast<size_t>(j) * n + jp) * T + h] != 0;
  }

  /// n*n*T p-value array for one slope (row-major (j, j', h)).
  std::vector<double> slope_pvalues(int l) const;
};

/// Requires N > p+1 and a full-rank design; throws otherwise. Cells where
/// the GLM does not converge (e.g. separation) are flagged and their
/// slope p-values set to 1.
EdgeRegResult edgereg_fit(const DynamicNetworkDataset& data);

/// Generalized spline regression per unordered edge: K(p+1) coefficients
/// from all N*T observations of that edge, Newton-type solve with the
/// iterates clamped to |coef| <= coef_clip. A failed edge falls back to
/// zero coefficients (counted in the returned warning total via
/// n_failed). Returns p+1 symmetric tensors B0..Bp.
struct DEdgeRegResult {
  std::vector<Tensor3> coefficients;  // size p+1, each n x n x K symmetric
  int n_failed = 0;
};
DEdgeRegResult dedgereg_fit(const DynamicNetworkDataset& data,
                            const SplineBasis& basis, double coef_clip = 30.0);

enum class Correction { kBonferroni, kBenjaminiHochberg };

/// P is a row-major n*n*T p-value array for one slope. Bonferroni
/// multiplies by n*n*T (the paper's stated test count); BH is the
/// standard step-up over the same collection. H[j][j'] = 1 iff the
/// smallest corrected p-value over time is <= alpha.
Eigen::MatrixXi select_edges(const std::vector<double>& P, int n, int T,
                             double alpha, Correction method);

/// TPR = ||H * H_true||_0 / (n^2 s0),
/// FPR = (||H||_0 - ||H * H_true||_0) / (n^2 s0), exactly as printed
/// (both counts over the full matrix). s0 = 0 is rejected.
std::pair<double, double> tpr_fpr(const Eigen::MatrixXi& H,
                                  const Eigen::MatrixXi& H_true, double s0);

/// False positives over the negative count n^2 (1 - s0); reported next
/// to the printed-formula FPR because that denominator is the positive
/// count.
double fpr_over_negatives(const Eigen::MatrixXi& H,
                          const Eigen::MatrixXi& H_true, double s0);

}  // namespace dnetreg

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dnetreg/dataset.hpp"
#include "dnetreg/model.hpp"
#include "dnetreg/spline.hpp"
#include "dnetreg/tensor.hpp"

namespace dnetreg {

struct FitOptions {
  int R = 1;
  double lambda = 0.0;
  int K = 8;
  int spline_degree = 3;
  int max_outer_iters = 100;
  double outer_tol = 1e-6;
  int fista_max_iters = 500;
  double fista_tol = 1e-8;
  int newton_max_iters = 20;  // quasi-Newton cap per factor per outer pass
  double step = 0.0;          // FISTA step; <= 0 selects the analytic bound
  uint64_t seed = 0;
  double init_coef_clip = 30.0;  // initialization-only coefficient clamp

  void validate() const;
};

struct FitResult {
  ModelParams params;
  std::vector<double> objective_trace;  // penalized objective per outer pass
  bool converged = false;
  double final_loss = 0.0;  // unpenalized negative log-likelihood
  double ebic = 0.0;
  /// Nonzero slope fibers as (l, j, j') with j < j'.
  std::vector<std::array<int, 3>> support;
  double wall_time_sec = 0.0;
  int outer_iters = 0;
};

/// Element-wise generalized spline regression start: slope tensors come
/// straight from the per-edge fits and the baseline factors from a CP
/// decomposition of the per-edge intercept tensor (with the unmodeled
/// diagonal fibers imputed from the reconstruction).
ModelParams initialize(const DynamicNetworkDataset& data,
                       const SplineBasis& basis, int R,
                       double coef_clip = 30.0, uint64_t seed = 0);

struct DEdgeRegResult;  // baselines.hpp

/// The CP-assembly half of initialize, reusable when the element-wise
/// fit is already available.
ModelParams assemble_initial(const struct DEdgeRegResult& de,
                             const SplineBasis& basis, int R, int p,
                             uint64_t seed);

/// w_r <- w_r ||u1r||^2 ||u3r||, columns rescaled to unit norm. Leaves
/// the reconstructed tensor unchanged. A zero column zeroes the weight
/// and resets the column to a canonical unit vector.
void renormalize(CpFactors& f);

/// Per-fiber shrinkage: fiber <- (1 - tau/||fiber||)_+ fiber. Fibers with
/// norm <= tau become exactly zero.
Tensor4 group_shrink(const Tensor4& G, double tau);

/// Momentum recurrence h_{s+1} = (1 + sqrt(1 + 4 h_s^2)) / 2.
inline double fista_next_momentum(double h) {
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * h * h));
}

/// One quasi-Newton update of u1r (node_mode) or u3r against the loss
/// with every other parameter fixed. The backtracking line search only
/// accepts decreases, so the loss at the returned vector never exceeds
/// the loss at entry.
Eigen::VectorXd update_factor(const DynamicNetworkDataset& data,
                              const SplineBasis& basis,
                              const ModelParams& params, int r, bool node_mode,
                              int max_iters = 20);

/// Alternating minimization: quasi-Newton factor updates, Norm/Unit
/// rescaling, FISTA with group shrinkage over the slopes. Deterministic
/// given (data, opts). Pass a warm start to skip the element-wise
/// initialization (used by the tuning path).
FitResult fit(const DynamicNetworkDataset& data, const FitOptions& opts,
              const ModelParams* warm_start = nullptr);

/// N * loss + [log(n^2 NT / 2) + log(n^2 K (p+1) / 2)]
///          * [R (n + K) + (nonzero slope entries) / 2]
double ebic_value(double loss, const DynamicNetworkDataset& data, int K, int R,
                  int slope_nonzero_entries);

struct TuneCell {
  int R = 0;
  double lambda = 0.0;
  double ebic = 0.0;
  bool ok = false;
  int support_size = 0;  // nonzero fibers (unordered)
  std::string error;
};

struct TuneResult {
  int best_R = 0;
  double best_lambda = 0.0;
  std::vector<TuneCell> table;
  FitResult best_fit;
};

/// Fits every (R, lambda) combination, warm-starting each lambda path
/// from the previous (larger) lambda, and returns the eBIC minimizer.
/// Ties break toward smaller R, then larger lambda. Individual fit
/// failures are recorded and skipped; throws only if every cell fails.
TuneResult tune(const DynamicNetworkDataset& data,
                const std::vector<int>& R_grid,
                const std::vector<double>& lambda_grid,
                const FitOptions& base_opts);

}  // namespace dnetreg

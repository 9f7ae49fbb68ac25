#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dnetreg/baselines.hpp"
#include "dnetreg/dataset.hpp"
#include "dnetreg/fit.hpp"
#include "dnetreg/model.hpp"
#include "dnetreg/tensor.hpp"

namespace dnetreg {

struct SimConfig {
  int n = 50;
  int N = 50;
  int T = 100;
  int K_gen = 8;  // generator basis dimension (defaults match the fit)
  int R = 2;
  int p = 1;
  double s0 = 0.05;
  Family family = Family::kBernoulli;
  int spline_degree = 3;
  uint64_t seed = 0;
  bool zero_coefficients = false;  // debug: all coefficients forced to zero

  void validate() const;
};

struct GroundTruth {
  CpFactors b0_factors;
  Tensor3 B0;                    // reconstructed baseline tensor
  std::vector<Tensor3> slopes;   // B1..Bp (only B1 carries signal)
  Eigen::MatrixXi H_true;        // nonzero-fiber indicator for B1
  double realized_s0 = 0.0;      // ||H_true||_0 / n^2
  int gen_degree = 3;            // generator spline degree
};

/// Draws factor entries and covariates from N(0,1), plants whole
/// symmetric tube-fiber pairs of ones in B1 (ceil(s0 n^2 / 2) unordered
/// pairs), and samples edges independently from the family mean.
std::pair<DynamicNetworkDataset, GroundTruth> generate(const SimConfig& cfg);

/// Accuracy metrics of one estimate against the truth. NaN marks a
/// metric the estimator does not produce.
struct Metrics {
  double mu_err = std::numeric_limits<double>::quiet_NaN();
  double b0_err = std::numeric_limits<double>::quiet_NaN();
  double b1_err = std::numeric_limits<double>::quiet_NaN();
  double tpr = std::numeric_limits<double>::quiet_NaN();
  double fpr = std::numeric_limits<double>::quiet_NaN();
  double fpr_neg = std::numeric_limits<double>::quiet_NaN();
};

/// mu-error: sum_i ||mu_i - mu_hat_i||_F / N over the (n, n, T) array
/// with both triangles populated and the diagonal excluded.
Metrics evaluate_params(const ModelParams& est, const GroundTruth& truth,
                        const DynamicNetworkDataset& data,
                        const SplineBasis& basis);
Metrics evaluate_tensors(const std::vector<Tensor3>& est_b0_slopes,
                         const GroundTruth& truth,
                         const DynamicNetworkDataset& data,
                         const SplineBasis& basis);
Metrics evaluate_edgereg(const EdgeRegResult& est, const GroundTruth& truth,
                         const DynamicNetworkDataset& data, double alpha = 0.05,
                         Correction correction = Correction::kBonferroni);

struct StudyRow {
  std::string method;
  std::map<std::string, double> mean;  // metric -> mean over replicates
  std::map<std::string, double> sd;    // absent key when undefined
  int replicates_used = 0;
  int failures = 0;
};

struct StudyResult {
  SimConfig config;
  int replicates = 0;
  std::vector<StudyRow> rows;
  /// raw[rep][method] -> metrics
  std::vector<std::map<std::string, Metrics>> raw;
};

/// Independent replications with seeds derived from cfg.seed; per-method
/// failures are recorded and excluded from the aggregates. Methods:
/// "dnetreg", "dedgereg", "edgereg".
StudyResult run_study(const SimConfig& cfg, int replicates,
                      const std::vector<std::string>& methods,
                      const FitOptions& fit_opts);

}  // namespace dnetreg

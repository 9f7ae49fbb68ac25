#include "dnetreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dnetreg/rng.hpp"
#include "dnetreg/spline.hpp"

namespace dnetreg {

void SimConfig::validate() const {
  if (n < 2 || N < 1 || T < 1) throw std::invalid_argument("SimConfig: bad sizes");
  if (s0 <= 0.0 || s0 >= 1.0)
    throw std::invalid_argument("SimConfig: s0 must be in (0,1)");
  if (std::ceil(s0 * n * n / 2.0) < 1.0)
    throw std::invalid_argument("SimConfig: support would be empty");
  if (R < 1 || K_gen < spline_degree + 1 || p < 0)
    throw std::invalid_argument("SimConfig: bad R/K/p");
}

std::pair<DynamicNetworkDataset, GroundTruth> generate(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int n = cfg.n, N = cfg.N, T = cfg.T, K = cfg.K_gen, R = cfg.R,
            p = cfg.p;

  // baseline factors: raw normal entries, weights from the raw norms,
  // then unit-normalized columns
  GroundTruth truth;
  truth.b0_factors.w = Eigen::VectorXd(R);
  truth.b0_factors.U1 = Eigen::MatrixXd(n, R);
  truth.b0_factors.U3 = Eigen::MatrixXd(K, R);
  for (int r = 0; r < R; ++r) {
    for (int i = 0; i < n; ++i) truth.b0_factors.U1(i, r) = rng.normal();
    for (int k = 0; k < K; ++k) truth.b0_factors.U3(k, r) = rng.normal();
    const double n1 = truth.b0_factors.U1.col(r).norm();
    const double n3 = truth.b0_factors.U3.col(r).norm();
    truth.b0_factors.w[r] = n1 * n1 * n3;
    truth.b0_factors.U1.col(r) /= n1;
    truth.b0_factors.U3.col(r) /= n3;
  }
  if (cfg.zero_coefficients) truth.b0_factors.w.setZero();
  truth.B0 = cp_reconstruct(truth.b0_factors);

  // B1 support: whole tube-fiber pairs of ones on ceil(s0 n^2 / 2)
  // unordered pairs; remaining slopes are zero
  truth.slopes.assign(std::max(p, 0), Tensor3(n, n, K, /*symmetric=*/true));
  truth.H_true = Eigen::MatrixXi::Zero(n, n);
  if (p > 0 && !cfg.zero_coefficients) {
    const int n_pairs = n * (n - 1) / 2;
    const int q = std::min<int>(
        n_pairs, static_cast<int>(std::ceil(cfg.s0 * n * n / 2.0)));
    std::vector<int> idx(n_pairs);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx);
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(n_pairs);
    for (int j = 0; j < n; ++j)
      for (int jp = j + 1; jp < n; ++jp) pairs.emplace_back(j, jp);
    for (int s = 0; s < q; ++s) {
      const auto [j, jp] = pairs[idx[s]];
      for (int k = 0; k < K; ++k) {
        truth.slopes[0].at(j, jp, k) = 1.0;
        truth.slopes[0].at(jp, j, k) = 1.0;
      }
      truth.H_true(j, jp) = 1;
      truth.H_true(jp, j) = 1;
    }
  }
  truth.realized_s0 = truth.H_true.sum() / static_cast<double>(n) / n;
  truth.gen_degree = cfg.spline_degree;

  DynamicNetworkDataset data;
  data.N = N;
  data.n = n;
  data.T = T;
  data.p = p;
  data.family = cfg.family;
  data.time_grid.resize(T);
  for (int h = 0; h < T; ++h)
    data.time_grid[h] = T > 1 ? static_cast<double>(h) / (T - 1) : 0.0;

  data.X.resize(N, p);
  for (int i = 0; i < N; ++i)
    for (int l = 0; l < p; ++l) data.X(i, l) = rng.normal();
  if (p > 0) standardize_columns(data.X);

  // per-time predictor pieces on the upper triangle
  const SplineBasis basis(K, cfg.spline_degree);
  const int m = n * (n - 1) / 2;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(m);
  for (int j = 0; j < n; ++j)
    for (int jp = j + 1; jp < n; ++jp) pairs.emplace_back(j, jp);
  std::vector<double> base(static_cast<size_t>(T) * m);
  std::vector<double> slope(static_cast<size_t>(std::max(p, 1)) * T * m, 0.0);
  for (int h = 0; h < T; ++h) {
    const Eigen::VectorXd phi = basis.eval(data.time_grid[h]);
    for (int e = 0; e < m; ++e) {
      const auto [j, jp] = pairs[e];
      double s = 0.0;
      const double* f = truth.B0.fiber(j, jp);
      for (int k = 0; k < K; ++k) s += phi[k] * f[k];
      base[static_cast<size_t>(h) * m + e] = s;
      for (int l = 0; l < p; ++l) {
        double sl = 0.0;
        const double* fl = truth.slopes[l].fiber(j, jp);
        for (int k = 0; k < K; ++k) sl += phi[k] * fl[k];
        slope[(static_cast<size_t>(l) * T + h) * m + e] = sl;
      }
    }
  }

  data.adjacency.assign(N, std::vector<double>(static_cast<size_t>(T) * n * n,
                                               0.0));
  for (int i = 0; i < N; ++i)
    for (int h = 0; h < T; ++h)
      for (int e = 0; e < m; ++e) {
        double eta = base[static_cast<size_t>(h) * m + e];
        for (int l = 0; l < p; ++l)
          eta += data.X(i, l) * slope[(static_cast<size_t>(l) * T + h) * m + e];
        if (cfg.zero_coefficients) eta = 0.0;
        double a = 0.0;
        switch (cfg.family) {
          case Family::kBernoulli:
            a = rng.uniform() < psi_prime(Family::kBernoulli, eta) ? 1.0 : 0.0;
            break;
          case Family::kGaussian:
            a = eta + rng.normal();
            break;
          case Family::kPoisson:
            a = static_cast<double>(rng.poisson(std::exp(std::min(eta, 30.0))));
            break;
        }
        const auto [j, jp] = pairs[e];
        data.adj(i, h, j, jp) = a;
        data.adj(i, h, jp, j) = a;
      }
  return {std::move(data), std::move(truth)};
}

namespace {

double offdiag_fro_error(const Tensor3& a, const Tensor3& b) {
  double s = 0.0;
  for (int j = 0; j < a.n1; ++j)
    for (int jp = 0; jp < a.n2; ++jp) {
      if (j == jp) continue;
      for (int k = 0; k < a.K; ++k) {
        const double d = a.at(j, jp, k) - b.at(j, jp, k);
        s += d * d;
      }
    }
  return std::sqrt(s);
}

// sum_i ||mu_i - mu_hat_i||_F / N with both triangles populated and the
// diagonal excluded; mu_hat supplied per (i, h, packed pair index).
template <typename MuHat>
double mu_error(const DynamicNetworkDataset& data, const GroundTruth& truth,
                MuHat&& mu_hat) {
  const SplineBasis gen_basis(truth.B0.K, truth.gen_degree);
  const int n = data.n, T = data.T, p = data.p;
  const int m = n * (n - 1) / 2;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(m);
  for (int j = 0; j < n; ++j)
    for (int jp = j + 1; jp < n; ++jp) pairs.emplace_back(j, jp);

  const int Kg = truth.B0.K;
  std::vector<double> base(static_cast<size_t>(T) * m);
  std::vector<double> slope(static_cast<size_t>(std::max(p, 1)) * T * m, 0.0);
  for (int h = 0; h < T; ++h) {
    const Eigen::VectorXd phi = gen_basis.eval(data.time_grid[h]);
    for (int e = 0; e < m; ++e) {
      const auto [j, jp] = pairs[e];
      double s = 0.0;
      const double* f = truth.B0.fiber(j, jp);
      for (int k = 0; k < Kg; ++k) s += phi[k] * f[k];
      base[static_cast<size_t>(h) * m + e] = s;
      for (int l = 0; l < p; ++l) {
        double sl = 0.0;
        const double* fl = truth.slopes[l].fiber(j, jp);
        for (int k = 0; k < Kg; ++k) sl += phi[k] * fl[k];
        slope[(static_cast<size_t>(l) * T + h) * m + e] = sl;
      }
    }
  }
  double acc = 0.0;
  for (int i = 0; i < data.N; ++i) {
    double sq = 0.0;
    for (int h = 0; h < T; ++h)
      for (int e = 0; e < m; ++e) {
        double eta = base[static_cast<size_t>(h) * m + e];
        for (int l = 0; l < p; ++l)
          eta += data.X(i, l) * slope[(static_cast<size_t>(l) * T + h) * m + e];
        const double mu = psi_prime(data.family, eta);
        const double d = mu - mu_hat(i, h, e);
        sq += d * d;
      }
    acc += std::sqrt(2.0 * sq);  // both triangles
  }
  return acc / data.N;
}

// packed per-time predictor contributions of an estimate given as tensors
struct TensorPredictor {
  std::vector<double> base;   // T*m
  std::vector<double> slope;  // p*T*m
  int m = 0, T = 0, p = 0;
  Family family;
  const Eigen::MatrixXd* X = nullptr;

  TensorPredictor(const Tensor3& B0, const std::vector<Tensor3>& Bs,
                  const DynamicNetworkDataset& data, const SplineBasis& basis) {
    const int n = data.n;
    T = data.T;
    p = data.p;
    m = n * (n - 1) / 2;
    family = data.family;
    X = &data.X;
    base.resize(static_cast<size_t>(T) * m);
    slope.assign(static_cast<size_t>(std::max(p, 1)) * T * m, 0.0);
    const int K = B0.K;
    for (int h = 0; h < T; ++h) {
      const Eigen::VectorXd phi = basis.eval(data.time_grid[h]);
      int e = 0;
      for (int j = 0; j < n; ++j)
        for (int jp = j + 1; jp < n; ++jp, ++e) {
          double s = 0.0;
          const double* f = B0.fiber(j, jp);
          for (int k = 0; k < K; ++k) s += phi[k] * f[k];
          base[static_cast<size_t>(h) * m + e] = s;
          for (int l = 0; l < p; ++l) {
            double sl = 0.0;
            const double* fl = Bs[l].fiber(j, jp);
            for (int k = 0; k < K; ++k) sl += phi[k] * fl[k];
            slope[(static_cast<size_t>(l) * T + h) * m + e] = sl;
          }
        }
    }
  }

  double mu(int i, int h, int e) const {
    double eta = base[static_cast<size_t>(h) * m + e];
    for (int l = 0; l < p; ++l)
      eta += (*X)(i, l) * slope[(static_cast<size_t>(l) * T + h) * m + e];
    return psi_prime(family, eta);
  }
};

}  // namespace

Metrics evaluate_tensors(const std::vector<Tensor3>& est_b0_slopes,
                         const GroundTruth& truth,
                         const DynamicNetworkDataset& data,
                         const SplineBasis& basis) {
  if (est_b0_slopes.empty())
    throw std::invalid_argument("evaluate_tensors: empty estimate");
  if (est_b0_slopes[0].K != truth.B0.K)
    throw std::invalid_argument("evaluate_tensors: basis dimension mismatch");
  const Tensor3& B0_hat = est_b0_slopes[0];
  std::vector<Tensor3> slopes(est_b0_slopes.begin() + 1, est_b0_slopes.end());
  if (static_cast<int>(slopes.size()) != data.p)
    throw std::invalid_argument("evaluate_tensors: slope count mismatch");

  Metrics out;
  TensorPredictor pred(B0_hat, slopes, data, basis);
  out.mu_err = mu_error(data, truth,
                        [&](int i, int h, int e) { return pred.mu(i, h, e); });
  out.b0_err = offdiag_fro_error(B0_hat, truth.B0);
  if (data.p > 0) out.b1_err = offdiag_fro_error(slopes[0], truth.slopes[0]);
  return out;
}

Metrics evaluate_params(const ModelParams& est, const GroundTruth& truth,
                        const DynamicNetworkDataset& data,
                        const SplineBasis& basis) {
  std::vector<Tensor3> tensors;
  tensors.push_back(cp_reconstruct(est.baseline));
  for (int l = 0; l < est.slopes.p; ++l) tensors.push_back(est.slopes.slice(l));
  Metrics out = evaluate_tensors(tensors, truth, data, basis);

  if (data.p > 0 && truth.realized_s0 > 0.0) {
    // support = nonzero tube fibers of the first slope tensor
    const auto norms = fiber_group_norms(est.slopes);
    Eigen::MatrixXi H = Eigen::MatrixXi::Zero(data.n, data.n);
    for (int j = 0; j < data.n; ++j)
      for (int jp = 0; jp < data.n; ++jp)
        if (j != jp && norms[0](j, jp) > 0.0) H(j, jp) = 1;
    std::tie(out.tpr, out.fpr) = tpr_fpr(H, truth.H_true, truth.realized_s0);
    out.fpr_neg = fpr_over_negatives(H, truth.H_true, truth.realized_s0);
  }
  return out;
}

Metrics evaluate_edgereg(const EdgeRegResult& est, const GroundTruth& truth,
                         const DynamicNetworkDataset& data, double alpha,
                         Correction correction) {
  Metrics out;
  const int n = data.n, T = data.T, p = data.p;
  const int m = n * (n - 1) / 2;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(m);
  for (int j = 0; j < n; ++j)
    for (int jp = j + 1; jp < n; ++jp) pairs.emplace_back(j, jp);
  out.mu_err = mu_error(data, truth, [&](int i, int h, int e) {
    const auto [j, jp] = pairs[e];
    double eta = est.coef_at(j, jp, h, 0);
    for (int l = 0; l < p; ++l)
      eta += est.coef_at(j, jp, h, l + 1) * data.X(i, l);
    return psi_prime(data.family, eta);
  });
  if (p > 0 && truth.realized_s0 > 0.0) {
    const Eigen::MatrixXi H =
        select_edges(est.slope_pvalues(0), n, T, alpha, correction);
    std::tie(out.tpr, out.fpr) = tpr_fpr(H, truth.H_true, truth.realized_s0);
    out.fpr_neg = fpr_over_negatives(H, truth.H_true, truth.realized_s0);
  }
  return out;
}

namespace {

const std::vector<std::string> kMetricKeys = {"mu_err", "b0_err", "b1_err",
                                              "tpr",    "fpr",    "fpr_neg"};

double metric_by_key(const Metrics& m, const std::string& key) {
  if (key == "mu_err") return m.mu_err;
  if (key == "b0_err") return m.b0_err;
  if (key == "b1_err") return m.b1_err;
  if (key == "tpr") return m.tpr;
  if (key == "fpr") return m.fpr;
  return m.fpr_neg;
}

}  // namespace

StudyResult run_study(const SimConfig& cfg, int replicates,
                      const std::vector<std::string>& methods,
                      const FitOptions& fit_opts) {
  if (replicates < 1) throw std::invalid_argument("run_study: replicates < 1");
  cfg.validate();
  StudyResult out;
  out.config = cfg;
  out.replicates = replicates;
  out.raw.resize(replicates);

  const bool want_dnetreg =
      std::find(methods.begin(), methods.end(), "dnetreg") != methods.end();
  const bool want_dedgereg =
      std::find(methods.begin(), methods.end(), "dedgereg") != methods.end();
  const bool want_edgereg =
      std::find(methods.begin(), methods.end(), "edgereg") != methods.end();
  std::map<std::string, int> failures;

  for (int rep = 0; rep < replicates; ++rep) {
    SimConfig rep_cfg = cfg;
    rep_cfg.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (rep + 1));
    auto [data, truth] = generate(rep_cfg);
    const SplineBasis fit_basis(fit_opts.K, fit_opts.spline_degree);

    // the element-wise spline fit doubles as the dnetreg initializer
    DEdgeRegResult de;
    bool have_de = false;
    if (want_dnetreg || want_dedgereg) {
      try {
        de = dedgereg_fit(data, fit_basis, fit_opts.init_coef_clip);
        have_de = true;
      } catch (const std::exception& e) {
        std::cerr << "[dnetreg] warning: dedgereg failed on replicate " << rep
                  << ": " << e.what() << "\n";
      }
    }

    if (want_dedgereg) {
      if (have_de) {
        try {
          out.raw[rep]["dedgereg"] =
              evaluate_tensors(de.coefficients, truth, data, fit_basis);
        } catch (const std::exception& e) {
          ++failures["dedgereg"];
          std::cerr << "[dnetreg] warning: dedgereg evaluation failed: "
                    << e.what() << "\n";
        }
      } else {
        ++failures["dedgereg"];
      }
    }

    if (want_dnetreg) {
      try {
        if (!have_de) throw std::runtime_error("initializer unavailable");
        const ModelParams warm =
            assemble_initial(de, fit_basis, fit_opts.R, data.p, rep_cfg.seed);
        FitOptions opts = fit_opts;
        opts.seed = rep_cfg.seed;
        FitResult fr = fit(data, opts, &warm);
        out.raw[rep]["dnetreg"] =
            evaluate_params(fr.params, truth, data, fit_basis);
      } catch (const std::exception& e) {
        ++failures["dnetreg"];
        std::cerr << "[dnetreg] warning: dnetreg failed on replicate " << rep
                  << ": " << e.what() << "\n";
      }
    }

    if (want_edgereg) {
      try {
        EdgeRegResult er = edgereg_fit(data);
        out.raw[rep]["edgereg"] = evaluate_edgereg(er, truth, data);
      } catch (const std::exception& e) {
        ++failures["edgereg"];
        std::cerr << "[dnetreg] warning: edgereg failed on replicate " << rep
                  << ": " << e.what() << "\n";
      }
    }
  }

  for (const std::string& method : methods) {
    StudyRow row;
    row.method = method;
    row.failures = failures[method];
    for (const auto& key : kMetricKeys) {
      std::vector<double> vals;
      for (int rep = 0; rep < replicates; ++rep) {
        auto it = out.raw[rep].find(method);
        if (it == out.raw[rep].end()) continue;
        const double v = metric_by_key(it->second, key);
        if (std::isfinite(v)) vals.push_back(v);
      }
      if (vals.empty()) continue;
      const double mean =
          std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
      row.mean[key] = mean;
      row.replicates_used = static_cast<int>(vals.size());
      if (vals.size() > 1) {
        double sq = 0.0;
        for (double v : vals) sq += (v - mean) * (v - mean);
        row.sd[key] = std::sqrt(sq / (vals.size() - 1));
      }
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace dnetreg

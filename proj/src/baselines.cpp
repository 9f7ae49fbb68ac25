#include "dnetreg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dnetreg/family.hpp"
#include "dnetreg/parallel.hpp"

namespace dnetreg {

namespace {

double wald_p(double z) {
  if (!std::isfinite(z)) return 0.0;
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

// Clamped empirical logit/link for the fallback intercept of degenerate
// bernoulli cells.
double fallback_intercept(Family fam, const Eigen::VectorXd& y, double clip) {
  const double mean = y.mean();
  double eta;
  switch (fam) {
    case Family::kBernoulli: {
      const double nn = static_cast<double>(y.size());
      const double adj = (mean * nn + 0.5) / (nn + 1.0);
      eta = std::log(adj / (1.0 - adj));
      break;
    }
    case Family::kPoisson:
      eta = std::log(std::max(mean, 1e-8));
      break;
    case Family::kGaussian:
      eta = mean;
      break;
  }
  return std::clamp(eta, -clip, clip);
}

struct GlmFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  bool converged = false;
};

// Canonical-link Newton (IRLS) with iterate clamping. Z is the shared
// design; y the per-cell response.
GlmFit irls(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Family fam,
            double clip, int max_iters, double tol) {
  const long d = Z.cols();
  GlmFit out;
  out.beta = Eigen::VectorXd::Zero(d);
  out.se = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());

  if (fam == Family::kGaussian) {
    // closed form; dispersion estimated from residuals
    Eigen::MatrixXd G = Z.transpose() * Z;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    out.beta = ldlt.solve(Z.transpose() * y);
    const double dof = std::max<double>(1.0, Z.rows() - d);
    const double sigma2 = (y - Z * out.beta).squaredNorm() / dof;
    Eigen::MatrixXd cov = sigma2 * ldlt.solve(Eigen::MatrixXd::Identity(d, d));
    out.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.converged = true;
    return out;
  }

  Eigen::VectorXd eta(Z.rows()), mu(Z.rows()), w(Z.rows());
  Eigen::MatrixXd H(d, d);
  for (int it = 0; it < max_iters; ++it) {
    eta.noalias() = Z * out.beta;
    for (long r = 0; r < eta.size(); ++r) {
      mu[r] = psi_prime(fam, eta[r]);
      w[r] = psi_second(fam, eta[r]);
    }
    Eigen::VectorXd g = Z.transpose() * (y - mu);
    Eigen::MatrixXd Zw = Z.array().colwise() * w.array().sqrt();
    H.noalias() = Zw.transpose() * Zw;
    H.diagonal().array() += 1e-10;
    Eigen::VectorXd delta = H.ldlt().solve(g);
    if (!delta.allFinite()) return out;
    out.beta += delta;
    out.beta = out.beta.cwiseMax(-clip).cwiseMin(clip);
    if (delta.lpNorm<Eigen::Infinity>() < tol) {
      // observed information at the solution for Wald standard errors
      eta.noalias() = Z * out.beta;
      for (long r = 0; r < eta.size(); ++r) w[r] = psi_second(fam, eta[r]);
      Zw = Z.array().colwise() * w.array().sqrt();
      H.noalias() = Zw.transpose() * Zw;
      H.diagonal().array() += 1e-10;
      Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
      out.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
      // a boundary solution is separation, not convergence
      out.converged = out.beta.lpNorm<Eigen::Infinity>() < clip - 1e-9;
      return out;
    }
  }
  return out;
}

}  // namespace

std::vector<double> EdgeRegResult::slope_pvalues(int l) const {
  std::vector<double> P(static_cast<size_t>(n) * n * T, 1.0);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp) {
      if (j == jp) continue;
      for (int h = 0; h < T; ++h)
        P[(static_cast<size_t>(j) * n + jp) * T + h] = pval_at(j, jp, h, l);
    }
  return P;
}

EdgeRegResult edgereg_fit(const DynamicNetworkDataset& data) {
  data.validate();
  const int n = data.n, T = data.T, p = data.p, N = data.N;
  if (N <= p + 1)
    throw std::invalid_argument("edgereg_fit: need N > p + 1");
  Eigen::MatrixXd Z(N, p + 1);
  Z.col(0).setOnes();
  if (p > 0) Z.rightCols(p) = data.X;
  if (Eigen::FullPivLU<Eigen::MatrixXd>(Z).rank() < p + 1)
    throw std::invalid_argument("edgereg_fit: rank-deficient design");

  EdgeRegResult out;
  out.n = n;
  out.T = T;
  out.p = p;
  out.coef.assign(static_cast<size_t>(n) * n * T * (p + 1), 0.0);
  out.pval.assign(static_cast<size_t>(n) * n * T * std::max(p, 1), 1.0);
  if (p == 0) out.pval.clear();
  out.converged.assign(static_cast<size_t>(n) * n * T, 0);

  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < n; ++j)
    for (int jp = j + 1; jp < n; ++jp) pairs.emplace_back(j, jp);

  parallel_for(static_cast<int>(pairs.size()), [&](int e) {
    const auto [j, jp] = pairs[e];
    Eigen::VectorXd y(N);
    for (int h = 0; h < T; ++h) {
      for (int i = 0; i < N; ++i) y[i] = data.adj(i, h, j, jp);
      const bool constant = (y.array() == y[0]).all();
      GlmFit f;
      if (constant && data.family != Family::kGaussian) {
        f.beta = Eigen::VectorXd::Zero(p + 1);
        f.beta[0] = fallback_intercept(data.family, y, 30.0);
        f.converged = false;
      } else {
        f = irls(Z, y, data.family, 30.0, 50, 1e-8);
        if (!f.converged) {
          f.beta.setZero();
          f.beta[0] = fallback_intercept(data.family, y, 30.0);
        }
      }
      for (auto [a, b] : {std::pair{j, jp}, std::pair{jp, j}}) {
        const size_t cbase = (static_cast<size_t>(a) * n + b) * T * (p + 1) +
                             static_cast<size_t>(h) * (p + 1);
        for (int c = 0; c <= p; ++c) out.coef[cbase + c] = f.beta[c];
        out.converged[(static_cast<size_t>(a) * n + b) * T + h] = f.converged;
        if (p > 0) {
          const size_t pbase = (static_cast<size_t>(a) * n + b) * T * p +
                               static_cast<size_t>(h) * p;
          for (int l = 0; l < p; ++l) {
            double pv = 1.0;
            if (f.converged) {
              const double se = f.se[l + 1];
              pv = se > 0.0 ? wald_p(f.beta[l + 1] / se)
                            : (f.beta[l + 1] != 0.0 ? 0.0 : 1.0);
            }
            out.pval[pbase + l] = pv;
          }
        }
      }
    }
  });
  return out;
}

DEdgeRegResult dedgereg_fit(const DynamicNetworkDataset& data,
                            const SplineBasis& basis, double coef_clip) {
  data.validate();
  const int n = data.n, T = data.T, p = data.p, N = data.N;
  const int K = basis.dimension();
  const int d = K * (p + 1);
  if (static_cast<long>(N) * T <= d)
    throw std::invalid_argument("dedgereg_fit: need N*T > K*(p+1)");

  // shared design: row (i, h) = [phi(t_h), x_i1 phi(t_h), ..., x_ip phi(t_h)]
  const Eigen::MatrixXd Phi = basis.basis_matrix(data.time_grid);
  Eigen::MatrixXd Z(static_cast<long>(N) * T, d);
  for (int i = 0; i < N; ++i)
    for (int h = 0; h < T; ++h) {
      const long row = static_cast<long>(i) * T + h;
      Z.block(row, 0, 1, K) = Phi.row(h);
      for (int l = 0; l < p; ++l)
        Z.block(row, K * (l + 1), 1, K) = data.X(i, l) * Phi.row(h);
    }

  // gaussian solves share one factorization
  Eigen::LDLT<Eigen::MatrixXd> shared_ldlt;
  if (data.family == Family::kGaussian) {
    Eigen::MatrixXd G = Z.transpose() * Z;
    G.diagonal().array() += 1e-10;
    shared_ldlt.compute(G);
  }

  DEdgeRegResult out;
  out.coefficients.assign(p + 1, Tensor3(n, n, K, /*symmetric=*/true));

  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < n; ++j)
    for (int jp = j + 1; jp < n; ++jp) pairs.emplace_back(j, jp);
  std::vector<uint8_t> failed(pairs.size(), 0);

  parallel_for(static_cast<int>(pairs.size()), [&](int e) {
    const auto [j, jp] = pairs[e];
    Eigen::VectorXd y(static_cast<long>(N) * T);
    for (int i = 0; i < N; ++i)
      for (int h = 0; h < T; ++h)
        y[static_cast<long>(i) * T + h] = data.adj(i, h, j, jp);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
    bool ok = true;
    if (data.family == Family::kGaussian) {
      beta = shared_ldlt.solve(Z.transpose() * y);
      ok = beta.allFinite();
    } else {
      GlmFit f = irls(Z, y, data.family, coef_clip, 60, 1e-9);
      // a clipped solution is still a usable start; only non-finite
      // output falls back to zero
      beta = f.beta.allFinite() ? f.beta : Eigen::VectorXd::Zero(d);
      ok = f.beta.allFinite();
    }
    if (!ok) {
      beta.setZero();
      failed[e] = 1;
    }
    for (int c = 0; c <= p; ++c)
      for (int k = 0; k < K; ++k) {
        const double v = beta[c * K + k];
        out.coefficients[c].at(j, jp, k) = v;
        out.coefficients[c].at(jp, j, k) = v;
      }
  });
  out.n_failed = std::accumulate(failed.begin(), failed.end(), 0);
  return out;
}

Eigen::MatrixXi select_edges(const std::vector<double>& P, int n, int T,
                             double alpha, Correction method) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("select_edges: alpha must be in (0,1]");
  const size_t M = static_cast<size_t>(n) * n * T;
  if (P.size() != M)
    throw std::invalid_argument("select_edges: p-value array size mismatch");

  std::vector<double> adjusted(M);
  if (method == Correction::kBonferroni) {
    const double mult = static_cast<double>(M);
    for (size_t i = 0; i < M; ++i) adjusted[i] = std::min(1.0, P[i] * mult);
  } else {
    // Benjamini-Hochberg step-up over the full collection
    std::vector<size_t> order(M);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return P[a] < P[b]; });
    double running = 1.0;
    for (size_t r = M; r-- > 0;) {
      const double val = P[order[r]] * static_cast<double>(M) /
                         static_cast<double>(r + 1);
      running = std::min(running, val);
      adjusted[order[r]] = running;
    }
  }

  Eigen::MatrixXi H = Eigen::MatrixXi::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp) {
      if (j == jp) continue;
      double mn = 1.0;
      for (int h = 0; h < T; ++h)
        mn = std::min(mn, adjusted[(static_cast<size_t>(j) * n + jp) * T + h]);
      H(j, jp) = mn <= alpha ? 1 : 0;
    }
  return H;
}

std::pair<double, double> tpr_fpr(const Eigen::MatrixXi& H,
                                  const Eigen::MatrixXi& H_true, double s0) {
  if (H.rows() != H_true.rows() || H.cols() != H_true.cols())
    throw std::invalid_argument("tpr_fpr: shape mismatch");
  if (s0 <= 0.0) throw std::invalid_argument("tpr_fpr: s0 must be positive");
  const double n = static_cast<double>(H.rows());
  const double denom = n * n * s0;
  double tp = 0.0, sel = 0.0;
  for (long j = 0; j < H.rows(); ++j)
    for (long jp = 0; jp < H.cols(); ++jp) {
      sel += H(j, jp) != 0;
      tp += (H(j, jp) != 0 && H_true(j, jp) != 0);
    }
  return {tp / denom, (sel - tp) / denom};
}

double fpr_over_negatives(const Eigen::MatrixXi& H,
                          const Eigen::MatrixXi& H_true, double s0) {
  const double n = static_cast<double>(H.rows());
  double tp = 0.0, sel = 0.0;
  for (long j = 0; j < H.rows(); ++j)
    for (long jp = 0; jp < H.cols(); ++jp) {
      sel += H(j, jp) != 0;
      tp += (H(j, jp) != 0 && H_true(j, jp) != 0);
    }
  const double negatives = n * n * (1.0 - s0);
  return negatives > 0.0 ? (sel - tp) / negatives : 0.0;
}

}  // namespace dnetreg

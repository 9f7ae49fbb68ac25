#include "dnetreg/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "dnetreg/baselines.hpp"
#include "dnetreg/engine.hpp"
#include "dnetreg/family.hpp"

namespace dnetreg {

void FitOptions::validate() const {
  if (R < 1) throw std::invalid_argument("FitOptions: R must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("FitOptions: lambda < 0");
  if (K < spline_degree + 1)
    throw std::invalid_argument("FitOptions: K must be >= degree + 1");
  if (max_outer_iters < 1 || fista_max_iters < 1 || newton_max_iters < 1)
    throw std::invalid_argument("FitOptions: iteration caps must be >= 1");
  if (outer_tol <= 0.0 || fista_tol <= 0.0)
    throw std::invalid_argument("FitOptions: tolerances must be positive");
}

namespace {

// Tied-mode CP fit over the off-diagonal cells only. The element-wise
// start never produces diagonal fibers (they are not modeled), so the
// factor extraction must not score them either. Row-wise Gauss-Seidel
// node updates and an exact basis-mode solve, both restricted to the
// masked cells; each step is an exact block minimization, so the masked
// error is non-increasing.
CpFactors masked_symmetric_cp(const Tensor3& B, int R, int max_sweeps,
                              double tol, uint64_t seed) {
  const int n = B.n1, K = B.K;
  const CpDecomposition start = cp_decompose(B, R, 100, 1e-12, seed, 2);
  Eigen::MatrixXd G = start.factors.U1;
  Eigen::MatrixXd H = start.factors.U3 * start.factors.w.asDiagonal();

  // contraction used by both steps: Qjr = sum_k B(j, j', k) H(k, r)
  auto masked_error = [&]() {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      for (int jp = 0; jp < n; ++jp) {
        if (j == jp) continue;
        for (int k = 0; k < K; ++k) {
          const double fit = (G.row(j).cwiseProduct(G.row(jp)) *
                              H.row(k).transpose())(0);
          const double d = B.at(j, jp, k) - fit;
          s += d * d;
        }
      }
    return std::sqrt(s);
  };

  double err = masked_error();
  const double scale = 1.0 + err;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double prev = err;
    // node rows, freshest values
    const Eigen::MatrixXd HtH = H.transpose() * H;
    for (int j = 0; j < n; ++j) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(R, R);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(R);
      for (int jp = 0; jp < n; ++jp) {
        if (jp == j) continue;
        const Eigen::VectorXd gj = G.row(jp).transpose();
        A += HtH.cwiseProduct(gj * gj.transpose());
        Eigen::VectorXd q = Eigen::VectorXd::Zero(R);
        for (int k = 0; k < K; ++k)
          q += B.at(j, jp, k) * H.row(k).transpose();
        b += q.cwiseProduct(gj);
      }
      A.diagonal().array() += 1e-12 * (1.0 + A.trace() / R);
      G.row(j) = A.ldlt().solve(b).transpose();
    }
    // basis mode, exact masked solve (same normal matrix for every k)
    Eigen::MatrixXd GtG = G.transpose() * G;
    Eigen::MatrixXd A = GtG.cwiseProduct(GtG);
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd gj = G.row(j).transpose();
      A -= (gj * gj.transpose()).cwiseProduct(gj * gj.transpose());
    }
    A.diagonal().array() += 1e-12 * (1.0 + A.trace() / R);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(R);
      for (int j = 0; j < n; ++j)
        for (int jp = 0; jp < n; ++jp) {
          if (j == jp) continue;
          b += B.at(j, jp, k) *
               G.row(j).cwiseProduct(G.row(jp)).transpose();
        }
      H.row(k) = ldlt.solve(b).transpose();
    }
    err = masked_error();
    if (err <= tol * scale) break;
    if (prev - err <= 1e-13 * scale) break;
  }

  CpFactors f;
  f.w = Eigen::VectorXd::Zero(R);
  f.U1 = Eigen::MatrixXd::Zero(n, R);
  f.U3 = Eigen::MatrixXd::Zero(K, R);
  for (int r = 0; r < R; ++r) {
    const double g2 = G.col(r).squaredNorm();
    const double hn = H.col(r).norm();
    if (g2 == 0.0 || hn == 0.0) {
      f.U1(0, r) = 1.0;
      f.U3(0, r) = 1.0;
      continue;
    }
    f.w[r] = g2 * hn;
    f.U1.col(r) = G.col(r) / std::sqrt(g2);
    f.U3.col(r) = H.col(r) / hn;
    int imax = 0;
    f.U1.col(r).cwiseAbs().maxCoeff(&imax);
    if (f.U1(imax, r) < 0.0) f.U1.col(r) = -f.U1.col(r);
  }
  return f;
}

}  // namespace

ModelParams assemble_initial(const DEdgeRegResult& de, const SplineBasis& basis,
                             int R, int p, uint64_t seed) {
  ModelParams params;
  params.baseline = masked_symmetric_cp(de.coefficients[0], R, 200, 1e-10, seed);
  params.slopes = Tensor4(de.coefficients[0].n1, basis.dimension(), p);
  for (int l = 0; l < p; ++l)
    params.slopes.set_slice(l, de.coefficients[l + 1]);
  return params;
}

ModelParams initialize(const DynamicNetworkDataset& data,
                       const SplineBasis& basis, int R, double coef_clip,
                       uint64_t seed) {
  DEdgeRegResult de = dedgereg_fit(data, basis, coef_clip);
  if (de.n_failed > 0)
    std::cerr << "[dnetreg] warning: " << de.n_failed
              << " edge regressions failed during initialization; "
                 "their coefficients start at zero\n";
  return assemble_initial(de, basis, R, data.p, seed);
}

void renormalize(CpFactors& f) {
  for (int r = 0; r < f.rank(); ++r) {
    const double n1 = f.U1.col(r).norm();
    const double n3 = f.U3.col(r).norm();
    if (n1 == 0.0 || n3 == 0.0) {
      std::cerr << "[dnetreg] warning: zero factor column for component " << r
                << "; weight frozen at 0\n";
      f.w[r] = 0.0;
      f.U1.col(r).setZero();
      f.U1(0, r) = 1.0;
      f.U3.col(r).setZero();
      f.U3(0, r) = 1.0;
      continue;
    }
    f.w[r] *= n1 * n1 * n3;
    f.U1.col(r) /= n1;
    f.U3.col(r) /= n3;
  }
}

Tensor4 group_shrink(const Tensor4& G, double tau) {
  if (tau < 0.0) throw std::invalid_argument("group_shrink: tau < 0");
  Tensor4 out = G;
  for (int l = 0; l < G.p; ++l)
    for (int j = 0; j < G.n; ++j)
      for (int jp = 0; jp < G.n; ++jp) {
        double q = 0.0;
        for (int k = 0; k < G.K; ++k) {
          const double v = G.at(j, jp, k, l);
          q += v * v;
        }
        const double norm = std::sqrt(q);
        if (norm <= tau) {
          for (int k = 0; k < G.K; ++k) out.at(j, jp, k, l) = 0.0;
        } else {
          const double scale = 1.0 - tau / norm;
          for (int k = 0; k < G.K; ++k) out.at(j, jp, k, l) *= scale;
        }
      }
  return out;
}

namespace {

struct FG {
  double f = 0.0;
  Eigen::VectorXd g;
};

// Dense BFGS with Armijo backtracking. Only accepts decreases, so the
// returned point never has a larger objective than the start.
Eigen::VectorXd bfgs_descent(
    Eigen::VectorXd x, const std::function<FG(const Eigen::VectorXd&)>& fg,
    const std::function<double(const Eigen::VectorXd&)>& fonly, int max_iters,
    double grad_tol = 1e-8) {
  const long d = x.size();
  FG cur = fg(x);
  if (!std::isfinite(cur.f)) return x;
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(d, d);
  for (int it = 0; it < max_iters; ++it) {
    if (cur.g.norm() <= grad_tol * (1.0 + std::fabs(cur.f))) break;
    Eigen::VectorXd dir = -(Hinv * cur.g);
    double slope = dir.dot(cur.g);
    if (!(slope < 0.0)) {
      dir = -cur.g;
      slope = dir.dot(cur.g);
      Hinv.setIdentity();
    }
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      x_new = x + step * dir;
      f_new = fonly(x_new);
      if (std::isfinite(f_new) && f_new <= cur.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    FG nxt = fg(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = nxt.g - cur.g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd Hy = Hinv * y;
      const double yHy = y.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) -
              (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    const double drop = cur.f - nxt.f;
    x = x_new;
    cur = nxt;
    if (drop <= 1e-12 * (1.0 + std::fabs(cur.f))) break;
  }
  return x;
}

// One factor update against the loss with all other parameters fixed.
// M0 is rebuilt per candidate from the component-r-free remainder, so
// each objective evaluation costs one data pass.
Eigen::VectorXd update_factor_impl(const LikelihoodEngine& eng,
                                   const CpFactors& factors,
                                   const std::vector<double>& C, int r,
                                   bool node_mode, int max_iters) {
  const int m = eng.m();
  const auto& pairs = eng.pairs();
  CpFactors rest = factors;
  rest.w[r] = 0.0;
  const std::vector<double> M0_rest = eng.build_m0(rest);
  std::vector<double> scratch_m0(M0_rest.size());
  std::vector<double> outer(m);

  auto assemble = [&](const Eigen::VectorXd& u) {
    CpFactors cf = factors;
    if (node_mode)
      cf.U1.col(r) = u;
    else
      cf.U3.col(r) = u;
    scratch_m0 = M0_rest;
    const Eigen::VectorXd prof = eng.phi() * (cf.w[r] * cf.U3.col(r));
    for (int e = 0; e < m; ++e) {
      const auto [j, jp] = pairs[e];
      outer[e] = cf.U1(j, r) * cf.U1(jp, r);
    }
    for (int h = 0; h < eng.T(); ++h) {
      double* row = scratch_m0.data() + static_cast<size_t>(h) * m;
      const double c = prof[h];
      for (int e = 0; e < m; ++e) row[e] += c * outer[e];
    }
    return cf;
  };
  auto fonly = [&](const Eigen::VectorXd& u) {
    assemble(u);
    return eng.loss(scratch_m0, C);
  };
  auto fg = [&](const Eigen::VectorXd& u) {
    CpFactors cf = assemble(u);
    std::vector<double> rsum;
    FG out;
    out.f = eng.loss_rsum(scratch_m0, C, rsum);
    out.g = eng.grad_factor(cf, r, node_mode, rsum);
    return out;
  };
  const Eigen::VectorXd u0 = node_mode ? factors.U1.col(r) : factors.U3.col(r);
  return bfgs_descent(u0, fg, fonly, max_iters);
}

void shrink_packed(std::vector<double>& gamma, int K, double tau) {
  const size_t fibers = gamma.size() / K;
  for (size_t f = 0; f < fibers; ++f) {
    double* v = gamma.data() + f * K;
    double q = 0.0;
    for (int k = 0; k < K; ++k) q += v[k] * v[k];
    const double norm = std::sqrt(q);
    if (norm <= tau) {
      for (int k = 0; k < K; ++k) v[k] = 0.0;
    } else {
      const double scale = 1.0 - tau / norm;
      for (int k = 0; k < K; ++k) v[k] *= scale;
    }
  }
}

struct FistaOutcome {
  std::vector<double> gamma;
  double objective = 0.0;  // best penalized objective seen
  double loss = 0.0;       // unpenalized loss at the returned iterate
  int iters = 0;
};

// FISTA over packed slopes with the baseline contribution M0 held fixed.
// The step follows the full-tensor parameterization (mirrored entries
// share one free fiber, so the packed gradient enters with step/2 and the
// shrinkage threshold is lambda*step); the analytic step bound is crude
// and backtracking enforces the majorization. Returns the best penalized
// iterate, which can never be worse than the entry point.
FistaOutcome fista_gamma(const LikelihoodEngine& eng,
                         const std::vector<double>& M0,
                         std::vector<double> gamma, double lambda,
                         const FitOptions& opts) {
  const int K = eng.K();
  FistaOutcome out;
  std::vector<double> C = eng.build_c(gamma);
  double f_entry = eng.loss(M0, C);
  out.gamma = gamma;
  out.loss = f_entry;
  out.objective = f_entry + lambda * eng.penalty_packed(gamma);
  if (gamma.empty()) return out;

  double step = opts.step;
  if (step <= 0.0) {
    double eta_max = 0.0;
    if (eng.family() == Family::kPoisson) eta_max = eng.max_abs_eta(M0, C);
    const double L = curvature_bound(eng.family(), eta_max) *
                     eng.lambda_max_xtx_over_n() * eng.max_phi_row_sqnorm();
    step = L > 0.0 ? 1.0 / L : 1.0;
  }

  std::vector<double> lam = gamma;      // momentum point
  std::vector<double> gamma_prev = gamma;
  double h = 1.0;
  double F_prev = out.objective;
  int up_count = 0;
  const size_t sz = gamma.size();

  for (int s = 0; s < opts.fista_max_iters; ++s) {
    out.iters = s + 1;
    std::vector<double> Clam = eng.build_c(lam);
    std::vector<double> S;
    const double f_lam = eng.loss_xres(M0, Clam, S);
    const std::vector<double> g = eng.grad_gamma_packed(S);

    std::vector<double> cand(sz);
    double f_cand = 0.0;
    for (int bt = 0;; ++bt) {
      for (size_t q = 0; q < sz; ++q) cand[q] = lam[q] - 0.5 * step * g[q];
      shrink_packed(cand, K, lambda * step);
      f_cand = eng.loss(M0, eng.build_c(cand));
      double lin = 0.0, quad = 0.0;
      for (size_t q = 0; q < sz; ++q) {
        const double d = cand[q] - lam[q];
        lin += g[q] * d;
        quad += d * d;
      }
      if (std::isfinite(f_cand) &&
          f_cand <= f_lam + lin + quad / step + 1e-12 * (1.0 + std::fabs(f_lam)))
        break;
      if (bt >= 60) break;
      step *= 0.5;
    }

    const double F_cand = f_cand + lambda * eng.penalty_packed(cand);
    const double h_next = fista_next_momentum(h);
    const double mom = (h - 1.0) / h_next;
    for (size_t q = 0; q < sz; ++q)
      lam[q] = cand[q] + mom * (cand[q] - gamma_prev[q]);
    gamma_prev = cand;
    h = h_next;

    if (F_cand < out.objective) {
      out.objective = F_cand;
      out.loss = f_cand;
      out.gamma = cand;
    }
    if (F_cand > F_prev + 1e-12) {
      if (++up_count >= 5) {
        step *= 0.5;
        h = 1.0;
        lam = cand;
        up_count = 0;
      }
    } else {
      up_count = 0;
    }
    if (std::fabs(F_cand - F_prev) <=
        opts.fista_tol * std::max(1.0, std::fabs(F_prev)))
      break;
    F_prev = F_cand;
  }
  return out;
}

}  // namespace

Eigen::VectorXd update_factor(const DynamicNetworkDataset& data,
                              const SplineBasis& basis,
                              const ModelParams& params, int r, bool node_mode,
                              int max_iters) {
  LikelihoodEngine eng(data, basis);
  const std::vector<double> C = eng.build_c(eng.pack_gamma(params.slopes));
  return update_factor_impl(eng, params.baseline, C, r, node_mode, max_iters);
}

FitResult fit(const DynamicNetworkDataset& data, const FitOptions& opts,
              const ModelParams* warm_start) {
  opts.validate();
  data.validate();
  const auto t_start = std::chrono::steady_clock::now();

  SplineBasis basis(opts.K, opts.spline_degree);
  ModelParams params =
      warm_start ? *warm_start
                 : initialize(data, basis, opts.R, opts.init_coef_clip,
                              opts.seed);
  LikelihoodEngine eng(data, basis);

  CpFactors factors = params.baseline;
  std::vector<double> gamma = eng.pack_gamma(params.slopes);
  std::vector<double> M0 = eng.build_m0(factors);
  double loss = eng.loss(M0, eng.build_c(gamma));
  double obj = loss + opts.lambda * eng.penalty_packed(gamma);

  FitResult res;
  res.objective_trace.push_back(obj);
  if (!std::isfinite(obj))
    throw std::runtime_error("fit: non-finite objective at initialization "
                             "(objective=" + std::to_string(obj) + ")");

  const int m = eng.m();
  const auto& pairs = eng.pairs();

  for (int t = 0; t < opts.max_outer_iters; ++t) {
    // ---- Step 2: factor-wise quasi-Newton updates -------------------
    std::vector<double> C = eng.build_c(gamma);
    for (int pass = 0; pass < 2; ++pass) {
      const bool node_mode = pass == 0;
      for (int r = 0; r < opts.R; ++r) {
        if (factors.w[r] == 0.0) continue;
        const Eigen::VectorXd u = update_factor_impl(
            eng, factors, C, r, node_mode, opts.newton_max_iters);
        if (node_mode)
          factors.U1.col(r) = u;
        else
          factors.U3.col(r) = u;
      }
    }

    // ---- Step 3: rescale and freeze vanished components -------------
    renormalize(factors);
    for (int r = 0; r < opts.R; ++r)
      if (factors.w[r] < 1e-12) factors.w[r] = 0.0;
    M0 = eng.build_m0(factors);

    // ---- Steps 4-5: FISTA over the slopes ----------------------------
    FistaOutcome fo = fista_gamma(eng, M0, gamma, opts.lambda, opts);
    gamma = std::move(fo.gamma);
    loss = fo.loss;
    const double obj_new = fo.objective;
    res.objective_trace.push_back(obj_new);
    res.outer_iters = t + 1;
    if (!std::isfinite(obj_new))
      throw std::runtime_error(
          "fit: non-finite objective at outer iteration " + std::to_string(t) +
          " (loss=" + std::to_string(loss) + ")");
    if (std::fabs(obj_new - obj) <=
        opts.outer_tol * std::max(1.0, std::fabs(obj))) {
      obj = obj_new;
      res.converged = true;
      break;
    }
    obj = obj_new;
  }

  res.params.baseline = factors;
  res.params.slopes = eng.unpack_gamma(gamma);
  res.final_loss = loss;

  int nnz_packed = 0;
  for (int l = 0; l < eng.p(); ++l)
    for (int e = 0; e < m; ++e) {
      const double* v = gamma.data() + (static_cast<size_t>(l) * m + e) * eng.K();
      double q = 0.0;
      int nz = 0;
      for (int k = 0; k < eng.K(); ++k) {
        q += v[k] * v[k];
        nz += v[k] != 0.0;
      }
      nnz_packed += nz;
      if (q > 0.0)
        res.support.push_back({l, pairs[e].first, pairs[e].second});
    }
  // mirrored entries double the packed nonzero count
  res.ebic = ebic_value(loss, data, opts.K, opts.R, 2 * nnz_packed);
  res.wall_time_sec = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t_start)
                          .count();
  return res;
}

double ebic_value(double loss, const DynamicNetworkDataset& data, int K, int R,
                  int slope_nonzero_entries) {
  const double n = data.n, N = data.N, T = data.T, p = data.p;
  const double log_terms =
      std::log(n * n * N * T / 2.0) + std::log(n * n * K * (p + 1.0) / 2.0);
  const double complexity = R * (n + K) + slope_nonzero_entries / 2.0;
  return N * loss + log_terms * complexity;
}

TuneResult tune(const DynamicNetworkDataset& data,
                const std::vector<int>& R_grid,
                const std::vector<double>& lambda_grid,
                const FitOptions& base_opts) {
  if (R_grid.empty() || lambda_grid.empty())
    throw std::invalid_argument("tune: empty grid");
  std::vector<int> Rs = R_grid;
  std::sort(Rs.begin(), Rs.end());
  std::vector<double> lambdas = lambda_grid;
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());

  TuneResult out;
  bool have_best = false;
  double best_ebic = 0.0;
  int cell_index = 0;
  for (int R : Rs) {
    std::optional<ModelParams> warm;
    for (double lambda : lambdas) {
      FitOptions opts = base_opts;
      opts.R = R;
      opts.lambda = lambda;
      opts.seed = base_opts.seed ^ static_cast<uint64_t>(cell_index);
      TuneCell cell;
      cell.R = R;
      cell.lambda = lambda;
      try {
        FitResult fr = fit(data, opts, warm ? &*warm : nullptr);
        cell.ok = true;
        cell.ebic = fr.ebic;
        cell.support_size = static_cast<int>(fr.support.size());
        warm = fr.params;  // next (smaller) lambda starts here
        if (!have_best || fr.ebic < best_ebic) {
          have_best = true;
          best_ebic = fr.ebic;
          out.best_R = R;
          out.best_lambda = lambda;
          out.best_fit = std::move(fr);
        }
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
        std::cerr << "[dnetreg] warning: tune cell (R=" << R
                  << ", lambda=" << lambda << ") failed: " << e.what() << "\n";
      }
      out.table.push_back(std::move(cell));
      ++cell_index;
    }
  }
  if (!have_best) throw std::runtime_error("tune: every grid cell failed");
  return out;
}

}  // namespace dnetreg

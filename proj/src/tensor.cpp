#include "dnetreg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dnetreg/rng.hpp"

namespace dnetreg {

double Tensor3::frobenius_norm() const {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double Tensor3::symmetry_gap() const {
  if (n1 != n2) return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = i + 1; j < n2; ++j)
      for (int k = 0; k < K; ++k)
        gap = std::max(gap, std::fabs(at(i, j, k) - at(j, i, k)));
  return gap;
}

Tensor3 Tensor4::slice(int l) const {
  Tensor3 s(n, n, K);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < K; ++k) s.at(i, j, k) = at(i, j, k, l);
  return s;
}

void Tensor4::set_slice(int l, const Tensor3& s) {
  if (s.n1 != n || s.n2 != n || s.K != K)
    throw std::invalid_argument("Tensor4::set_slice: shape mismatch");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < K; ++k) at(i, j, k, l) = s.at(i, j, k);
}

Eigen::VectorXd Tensor4::fiber(int i, int j, int l) const {
  Eigen::VectorXd f(K);
  for (int k = 0; k < K; ++k) f[k] = at(i, j, k, l);
  return f;
}

double Tensor4::frobenius_norm() const {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

int Tensor4::nonzero_count() const {
  int c = 0;
  for (double x : v) c += (x != 0.0);
  return c;
}

void CpFactors::validate(double tol) const {
  const int R = rank();
  if (U1.cols() != R || U3.cols() != R)
    throw std::invalid_argument("CpFactors: factor column count != rank");
  for (int r = 0; r < R; ++r) {
    if (w[r] < 0.0) throw std::invalid_argument("CpFactors: negative weight");
    if (w[r] == 0.0) continue;
    if (std::fabs(U1.col(r).norm() - 1.0) > tol ||
        std::fabs(U3.col(r).norm() - 1.0) > tol)
      throw std::invalid_argument("CpFactors: column not unit length");
  }
}

Eigen::MatrixXd mode3_product(const Tensor3& B, const Eigen::VectorXd& b) {
  if (b.size() != B.K)
    throw std::invalid_argument("mode3_product: vector length " +
                                std::to_string(b.size()) +
                                " != tensor third dimension " +
                                std::to_string(B.K));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(B.n1, B.n2);
  for (int i = 0; i < B.n1; ++i)
    for (int j = 0; j < B.n2; ++j) {
      const double* f = B.fiber(i, j);
      double s = 0.0;
      for (int k = 0; k < B.K; ++k) s += b[k] * f[k];
      out(i, j) = s;
    }
  return out;
}

Tensor3 cp_reconstruct(const CpFactors& f) {
  const int n = f.n(), K = f.K(), R = f.rank();
  Tensor3 T(n, n, K, /*symmetric=*/true);
  for (int r = 0; r < R; ++r) {
    if (f.w[r] == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double wi = f.w[r] * f.U1(i, r);
      for (int j = i; j < n; ++j) {
        const double wij = wi * f.U1(j, r);
        double* fij = T.fiber(i, j);
        for (int k = 0; k < K; ++k) fij[k] += wij * f.U3(k, r);
      }
    }
  }
  // mirror the strict upper triangle so symmetry holds exactly
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      for (int k = 0; k < K; ++k) T.at(i, j, k) = T.at(j, i, k);
  return T;
}

std::vector<Eigen::MatrixXd> fiber_group_norms(const Tensor4& G) {
  std::vector<Eigen::MatrixXd> out(G.p, Eigen::MatrixXd::Zero(G.n, G.n));
  for (int l = 0; l < G.p; ++l)
    for (int i = 0; i < G.n; ++i)
      for (int j = 0; j < G.n; ++j) {
        double s = 0.0;
        for (int k = 0; k < G.K; ++k) {
          const double x = G.at(i, j, k, l);
          s += x * x;
        }
        out[l](i, j) = std::sqrt(s);
      }
  return out;
}

namespace {

// Mode-3 unfolding (K x n^2) and mode-1 unfolding (n x nK) used by ALS.
// Column orderings match the Khatri-Rao products built below.
Eigen::MatrixXd unfold_mode3(const Tensor3& T) {
  Eigen::MatrixXd M(T.K, static_cast<long>(T.n1) * T.n2);
  for (int i = 0; i < T.n1; ++i)
    for (int j = 0; j < T.n2; ++j)
      for (int k = 0; k < T.K; ++k)
        M(k, static_cast<long>(i) * T.n2 + j) = T.at(i, j, k);
  return M;
}

Eigen::MatrixXd unfold_mode1(const Tensor3& T) {
  Eigen::MatrixXd M(T.n1, static_cast<long>(T.K) * T.n2);
  for (int i = 0; i < T.n1; ++i)
    for (int j = 0; j < T.n2; ++j)
      for (int k = 0; k < T.K; ++k)
        M(i, static_cast<long>(k) * T.n2 + j) = T.at(i, j, k);
  return M;
}

// rows (i*n + j) -> G(i,.) * G(j,.)
Eigen::MatrixXd khatri_rao_gg(const Eigen::MatrixXd& G) {
  const long n = G.rows(), R = G.cols();
  Eigen::MatrixXd P(n * n, R);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      P.row(i * n + j) = G.row(i).cwiseProduct(G.row(j));
  return P;
}

// rows (k*n + j) -> H(k,.) * G(j,.)
Eigen::MatrixXd khatri_rao_hg(const Eigen::MatrixXd& H,
                              const Eigen::MatrixXd& G) {
  const long K = H.rows(), n = G.rows(), R = G.cols();
  Eigen::MatrixXd P(K * n, R);
  for (long k = 0; k < K; ++k)
    for (long j = 0; j < n; ++j)
      P.row(k * n + j) = H.row(k).cwiseProduct(G.row(j));
  return P;
}

double recon_error(const Eigen::MatrixXd& T3, const Eigen::MatrixXd& G,
                   const Eigen::MatrixXd& H) {
  return (T3 - H * khatri_rao_gg(G).transpose()).norm();
}

// Ridge-stabilized solve of A x = b with A symmetric PSD.
Eigen::MatrixXd psd_solve(Eigen::MatrixXd A, const Eigen::MatrixXd& B) {
  const double ridge = 1e-12 * (A.trace() / std::max<long>(1, A.rows()) + 1.0);
  A.diagonal().array() += ridge;
  return A.ldlt().solve(B);
}

struct AlsRun {
  Eigen::MatrixXd G, H;
  double error = std::numeric_limits<double>::infinity();
  int sweeps = 0;
};

AlsRun run_als(const Eigen::MatrixXd& T3, const Eigen::MatrixXd& T1,
               Eigen::MatrixXd G, int max_sweeps, double tol,
               double scale) {
  const long R = G.cols();
  Eigen::MatrixXd H;
  // exact basis-mode solve given G
  auto solve_h = [&](const Eigen::MatrixXd& Gm) {
    Eigen::MatrixXd gram = (Gm.transpose() * Gm).eval();
    Eigen::MatrixXd A = gram.cwiseProduct(gram);
    return psd_solve(A, (T3 * khatri_rao_gg(Gm)).transpose()).transpose();
  };
  H = solve_h(G);
  double err = recon_error(T3, G, H);
  int sweeps = 0;
  while (sweeps < max_sweeps) {
    const double prev_err = err;
    // node-mode: least squares with the tied copy held fixed, then a
    // backtracking blend toward the current G if the tied error went up
    Eigen::MatrixXd A =
        (H.transpose() * H).cwiseProduct(G.transpose() * G).eval();
    Eigen::MatrixXd Gprop =
        psd_solve(A, (T1 * khatri_rao_hg(H, G)).transpose()).transpose();
    double step = 1.0;
    Eigen::MatrixXd Gnew = Gprop;
    for (int bt = 0; bt < 8; ++bt) {
      Eigen::MatrixXd Hc = solve_h(Gnew);
      double e = recon_error(T3, Gnew, Hc);
      if (e <= err * (1.0 + 1e-14)) {
        G = Gnew;
        H = Hc;
        err = e;
        break;
      }
      step *= 0.5;
      Gnew = step * Gprop + (1.0 - step) * G;
    }
    ++sweeps;
    if (err <= tol * scale) break;
    if (prev_err - err <= 1e-14 * scale) break;  // stalled
  }
  return AlsRun{G, H, err, sweeps};
}

}  // namespace

CpDecomposition cp_decompose(const Tensor3& T, int R, int max_sweeps,
                             double tol, uint64_t seed, int restarts) {
  if (T.n1 != T.n2) throw std::invalid_argument("cp_decompose: not square");
  if (T.symmetry_gap() > 1e-8 * (1.0 + T.frobenius_norm()))
    throw std::invalid_argument("cp_decompose: input not symmetric");
  if (R < 1) throw std::invalid_argument("cp_decompose: rank must be >= 1");
  if (R > std::min(T.n1, T.K))
    throw std::invalid_argument("cp_decompose: rank exceeds min(n, K)");

  const int n = T.n1, K = T.K;
  const double tnorm = T.frobenius_norm();
  const Eigen::MatrixXd T3 = unfold_mode3(T);
  const Eigen::MatrixXd T1 = unfold_mode1(T);

  CpDecomposition out;
  if (tnorm == 0.0) {
    out.factors.w = Eigen::VectorXd::Zero(R);
    out.factors.U1 = Eigen::MatrixXd::Zero(n, R);
    out.factors.U3 = Eigen::MatrixXd::Zero(K, R);
    for (int r = 0; r < R; ++r) {
      out.factors.U1(0, r) = 1.0;
      out.factors.U3(0, r) = 1.0;
    }
    return out;
  }

  AlsRun best;
  Rng rng(seed);
  for (int attempt = 0; attempt < 1 + restarts; ++attempt) {
    Eigen::MatrixXd G0(n, R);
    if (attempt == 0) {
      // spectral start: top-R left singular vectors of the node unfolding
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(T1, Eigen::ComputeThinU);
      const int got = std::min<int>(R, svd.matrixU().cols());
      G0.setZero();
      G0.leftCols(got) = svd.matrixU().leftCols(got);
      for (int r = got; r < R; ++r) G0(r % n, r) = 1.0;
    } else {
      for (int i = 0; i < n; ++i)
        for (int r = 0; r < R; ++r) G0(i, r) = rng.normal();
    }
    AlsRun run = run_als(T3, T1, G0, max_sweeps, tol, tnorm);
    if (run.error < best.error) best = run;
    if (best.error <= tol * tnorm) break;
  }

  // absorb column magnitudes into weights; the basis column keeps the
  // component sign so weights stay nonnegative
  CpFactors f;
  f.w = Eigen::VectorXd::Zero(R);
  f.U1 = Eigen::MatrixXd::Zero(n, R);
  f.U3 = Eigen::MatrixXd::Zero(K, R);
  for (int r = 0; r < R; ++r) {
    const double g2 = best.G.col(r).squaredNorm();
    const double hn = best.H.col(r).norm();
    if (g2 == 0.0 || hn == 0.0) {
      f.w[r] = 0.0;
      f.U1(0, r) = 1.0;
      f.U3(0, r) = 1.0;
      continue;
    }
    f.w[r] = g2 * hn;
    f.U1.col(r) = best.G.col(r) / std::sqrt(g2);
    f.U3.col(r) = best.H.col(r) / hn;
    // node-column sign is free (it appears twice); pin it for determinism
    int imax = 0;
    f.U1.col(r).cwiseAbs().maxCoeff(&imax);
    if (f.U1(imax, r) < 0.0) f.U1.col(r) = -f.U1.col(r);
  }
  // sort components by descending weight
  std::vector<int> order(R);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return f.w[a] > f.w[b]; });
  CpFactors sorted;
  sorted.w = Eigen::VectorXd(R);
  sorted.U1 = Eigen::MatrixXd(n, R);
  sorted.U3 = Eigen::MatrixXd(K, R);
  for (int r = 0; r < R; ++r) {
    sorted.w[r] = f.w[order[r]];
    sorted.U1.col(r) = f.U1.col(order[r]);
    sorted.U3.col(r) = f.U3.col(order[r]);
  }
  out.factors = sorted;
  out.reconstruction_error = best.error;
  out.sweeps = best.sweeps;
  return out;
}

}  // namespace dnetreg

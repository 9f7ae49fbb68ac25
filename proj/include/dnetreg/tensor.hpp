#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dnetreg {

/// Dense order-3 tensor, row-major with the tube/basis mode fastest:
/// entry (i, j, k) sits at (i*n2 + j)*K + k, so tube fibers are contiguous.
struct Tensor3 {
  int n1 = 0, n2 = 0, K = 0;
  bool symmetric = false;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int n1_, int n2_, int K_, bool symmetric_ = false)
      : n1(n1_), n2(n2_), K(K_), symmetric(symmetric_),
        v(static_cast<size_t>(n1_) * n2_ * K_, 0.0) {}

  double& at(int i, int j, int k) {
    return v[(static_cast<size_t>(i) * n2 + j) * K + k];
  }
  double at(int i, int j, int k) const {
    return v[(static_cast<size_t>(i) * n2 + j) * K + k];
  }
  const double* fiber(int i, int j) const {
    return v.data() + (static_cast<size_t>(i) * n2 + j) * K;
  }
  double* fiber(int i, int j) {
    return v.data() + (static_cast<size_t>(i) * n2 + j) * K;
  }
  size_t size() const { return v.size(); }

  double frobenius_norm() const;
  /// Max |T[i,j,k] - T[j,i,k]|; 0 for exactly symmetric tensors.
  double symmetry_gap() const;
  bool is_symmetric(double tol = 0.0) const { return symmetry_gap() <= tol; }
};

/// Dense order-4 tensor (n x n x K x p), row-major with the covariate mode
/// fastest: entry (i, j, k, l) sits at ((i*n + j)*K + k)*p + l.
struct Tensor4 {
  int n = 0, K = 0, p = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int K_, int p_)
      : n(n_), K(K_), p(p_),
        v(static_cast<size_t>(n_) * n_ * K_ * p_, 0.0) {}

  double& at(int i, int j, int k, int l) {
    return v[((static_cast<size_t>(i) * n + j) * K + k) * p + l];
  }
  double at(int i, int j, int k, int l) const {
    return v[((static_cast<size_t>(i) * n + j) * K + k) * p + l];
  }
  size_t size() const { return v.size(); }

  /// Order-3 slice along the covariate mode.
  Tensor3 slice(int l) const;
  void set_slice(int l, const Tensor3& s);
  /// Length-K tube fiber at (i, j) of slice l.
  Eigen::VectorXd fiber(int i, int j, int l) const;

  double frobenius_norm() const;
  int nonzero_count() const;
};

/// Factors of a symmetric rank-R CP decomposition: sum over r of
/// w_r * u1r (outer) u1r (outer) u3r, with unit-norm columns and w >= 0.
struct CpFactors {
  Eigen::VectorXd w;   // R weights
  Eigen::MatrixXd U1;  // n x R, unit columns
  Eigen::MatrixXd U3;  // K x R, unit columns

  int rank() const { return static_cast<int>(w.size()); }
  int n() const { return static_cast<int>(U1.rows()); }
  int K() const { return static_cast<int>(U3.rows()); }

  /// Throws if column norms deviate from 1 beyond tol or any w is negative.
  /// Components with w == 0 are allowed (degenerate / frozen components).
  void validate(double tol = 1e-10) const;
};

struct CpDecomposition {
  CpFactors factors;
  double reconstruction_error = 0.0;  // ||T - reconstruct||_F
  int sweeps = 0;
};

/// result[i][j] = sum_k b[k] * B[i,j,k]
Eigen::MatrixXd mode3_product(const Tensor3& B, const Eigen::VectorXd& b);

/// T[i,j,k] = sum_r w_r U1(i,r) U1(j,r) U3(k,r); output flagged symmetric.
Tensor3 cp_reconstruct(const CpFactors& f);

/// Symmetric-mode alternating least squares: the two node modes are tied
/// to one factor matrix updated by a single solve per sweep (with a
/// backtracking blend so reconstruction error never increases), and the
/// basis-mode solve is exact. Components come back sorted by descending
/// weight with w >= 0 (the basis-mode column carries the component sign)
/// and the sign of each node column fixed by its largest-magnitude entry.
CpDecomposition cp_decompose(const Tensor3& T, int R, int max_sweeps = 200,
                             double tol = 1e-12, uint64_t seed = 0,
                             int restarts = 3);

/// out[l](j, j') = ||G[j, j', ., l]||_2
std::vector<Eigen::MatrixXd> fiber_group_norms(const Tensor4& G);

}  // namespace dnetreg

#include "dnetreg/engine.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dnetreg/parallel.hpp"
#include "dnetreg/simd_math.hpp"

namespace dnetreg {

namespace {

constexpr int kLossOnly = 0;
constexpr int kRsum = 1;
constexpr int kXres = 2;

// Fused per-(subject, time) kernel: accumulates sum(A*eta - psi(eta)) and,
// when res != nullptr, writes A - psi'(eta).
double cell_kernel(Family family, const double* A, const double* eta, int m,
                   double* res, std::vector<double>& scratch) {
  double term = 0.0;
  switch (family) {
    case Family::kGaussian: {
      for (int e = 0; e < m; ++e) {
        const double x = eta[e];
        term += A[e] * x - 0.5 * x * x;
        if (res) res[e] = A[e] - x;
      }
      break;
    }
    case Family::kPoisson: {
      scratch.resize(m);
      simd::exp_array(eta, scratch.data(), m);
      for (int e = 0; e < m; ++e) {
        term += A[e] * eta[e] - scratch[e];
        if (res) res[e] = A[e] - scratch[e];
      }
      break;
    }
    case Family::kBernoulli: {
      scratch.resize(3 * m);
      double* na = scratch.data();
      double* ee = na + m;
      double* lg = ee + m;
      for (int e = 0; e < m; ++e) na[e] = -std::fabs(eta[e]);
      simd::exp_array(na, ee, m);
      simd::log1p_unit_array(ee, lg, m);
      // psi(eta) = max(eta, 0) + log1p(exp(-|eta|))
      for (int e = 0; e < m; ++e) {
        const double x = eta[e];
        const double pos = x > 0.0 ? x : 0.0;
        term += A[e] * x - (pos + lg[e]);
        if (res) {
          const double mu = x >= 0.0 ? 1.0 / (1.0 + ee[e])
                                     : ee[e] / (1.0 + ee[e]);
          res[e] = A[e] - mu;
        }
      }
      break;
    }
  }
  return term;
}

}  // namespace

LikelihoodEngine::LikelihoodEngine(const DynamicNetworkDataset& data,
                                   const SplineBasis& basis)
    : N_(data.N), n_(data.n), T_(data.T), K_(basis.dimension()), p_(data.p),
      m_(data.n * (data.n - 1) / 2), family_(data.family),
      Phi_(basis.basis_matrix(data.time_grid)), X_(data.X) {
  pairs_.reserve(m_);
  for (int j = 0; j < n_; ++j)
    for (int jp = j + 1; jp < n_; ++jp) pairs_.emplace_back(j, jp);
  // adjacency packed time-major: A[(h*N + i)*m + e]
  A_.resize(static_cast<size_t>(T_) * N_ * m_);
  for (int h = 0; h < T_; ++h)
    for (int i = 0; i < N_; ++i) {
      double* dst = A_.data() + (static_cast<size_t>(h) * N_ + i) * m_;
      const double* src = data.adjacency[i].data() +
                          static_cast<size_t>(h) * n_ * n_;
      int e = 0;
      for (int j = 0; j < n_; ++j)
        for (int jp = j + 1; jp < n_; ++jp) dst[e++] = src[j * n_ + jp];
    }
}

std::vector<double> LikelihoodEngine::pack_gamma(const Tensor4& G) const {
  if (G.n != n_ || G.K != K_ || G.p != p_)
    throw std::invalid_argument("pack_gamma: tensor shape mismatch");
  std::vector<double> gamma(static_cast<size_t>(p_) * m_ * K_);
  for (int l = 0; l < p_; ++l)
    for (int e = 0; e < m_; ++e) {
      const auto [j, jp] = pairs_[e];
      double* dst = gamma.data() + (static_cast<size_t>(l) * m_ + e) * K_;
      for (int k = 0; k < K_; ++k)
        dst[k] = 0.5 * (G.at(j, jp, k, l) + G.at(jp, j, k, l));
    }
  return gamma;
}

Tensor4 LikelihoodEngine::unpack_gamma(const std::vector<double>& gamma) const {
  Tensor4 G(n_, K_, p_);
  for (int l = 0; l < p_; ++l)
    for (int e = 0; e < m_; ++e) {
      const auto [j, jp] = pairs_[e];
      const double* src = gamma.data() + (static_cast<size_t>(l) * m_ + e) * K_;
      for (int k = 0; k < K_; ++k) {
        G.at(j, jp, k, l) = src[k];
        G.at(jp, j, k, l) = src[k];
      }
    }
  return G;
}

std::vector<double> LikelihoodEngine::build_m0(const CpFactors& f) const {
  std::vector<double> M0(static_cast<size_t>(T_) * m_, 0.0);
  const int R = f.rank();
  std::vector<double> outer(m_);
  for (int r = 0; r < R; ++r) {
    if (f.w[r] == 0.0) continue;
    const Eigen::VectorXd c = Phi_ * (f.w[r] * f.U3.col(r));  // T profile
    for (int e = 0; e < m_; ++e) {
      const auto [j, jp] = pairs_[e];
      outer[e] = f.U1(j, r) * f.U1(jp, r);
    }
    for (int h = 0; h < T_; ++h) {
      double* row = M0.data() + static_cast<size_t>(h) * m_;
      const double ch = c[h];
      for (int e = 0; e < m_; ++e) row[e] += ch * outer[e];
    }
  }
  return M0;
}

std::vector<double> LikelihoodEngine::build_c(
    const std::vector<double>& gamma) const {
  std::vector<double> C(static_cast<size_t>(p_) * T_ * m_);
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int l = 0; l < p_; ++l) {
    Eigen::Map<const RowMajor> Gm(gamma.data() + static_cast<size_t>(l) * m_ * K_,
                                  m_, K_);
    Eigen::Map<RowMajor> Cm(C.data() + static_cast<size_t>(l) * T_ * m_, T_, m_);
    Cm.noalias() = Phi_ * Gm.transpose();
  }
  return C;
}

template <int Mode>
double LikelihoodEngine::sweep(const std::vector<double>& M0,
                               const std::vector<double>& C,
                               std::vector<double>* out) const {
  std::vector<double> loss_h(T_, 0.0);
  parallel_for(T_, [&](int h) {
    thread_local std::vector<double> eta, res, scratch;
    eta.resize(m_);
    if (Mode != kLossOnly) res.resize(m_);
    const double* m0row = M0.data() + static_cast<size_t>(h) * m_;
    double acc = 0.0;
    for (int i = 0; i < N_; ++i) {
      std::memcpy(eta.data(), m0row, sizeof(double) * m_);
      for (int l = 0; l < p_; ++l) {
        const double x = X_(i, l);
        const double* crow =
            C.data() + (static_cast<size_t>(l) * T_ + h) * m_;
        for (int e = 0; e < m_; ++e) eta[e] += x * crow[e];
      }
      const double* arow = A_.data() + (static_cast<size_t>(h) * N_ + i) * m_;
      acc += cell_kernel(family_, arow, eta.data(), m_,
                         Mode == kLossOnly ? nullptr : res.data(), scratch);
      if (Mode == kRsum) {
        double* dst = out->data() + static_cast<size_t>(h) * m_;
        for (int e = 0; e < m_; ++e) dst[e] += res[e];
      } else if (Mode == kXres) {
        for (int l = 0; l < p_; ++l) {
          const double x = X_(i, l);
          double* dst = out->data() + (static_cast<size_t>(h) * p_ + l) * m_;
          for (int e = 0; e < m_; ++e) dst[e] += x * res[e];
        }
      }
    }
    loss_h[h] = acc;
  });
  double total = 0.0;
  for (int h = 0; h < T_; ++h) total += loss_h[h];
  return -total / N_;
}

double LikelihoodEngine::loss(const std::vector<double>& M0,
                              const std::vector<double>& C) const {
  return sweep<kLossOnly>(M0, C, nullptr);
}

double LikelihoodEngine::loss_rsum(const std::vector<double>& M0,
                                   const std::vector<double>& C,
                                   std::vector<double>& rsum) const {
  rsum.assign(static_cast<size_t>(T_) * m_, 0.0);
  return sweep<kRsum>(M0, C, &rsum);
}

double LikelihoodEngine::loss_xres(const std::vector<double>& M0,
                                   const std::vector<double>& C,
                                   std::vector<double>& S) const {
  S.assign(static_cast<size_t>(T_) * p_ * m_, 0.0);
  return sweep<kXres>(M0, C, &S);
}

Eigen::VectorXd LikelihoodEngine::grad_factor(const CpFactors& f, int r,
                                              bool node_mode,
                                              const std::vector<double>& rsum) const {
  if (node_mode) {
    // -(1/N) sum_h w_r (phi_h . u3r) Res0(h) u1r, Res0 summed over subjects
    const Eigen::VectorXd alpha = Phi_ * (f.w[r] * f.U3.col(r));
    std::vector<double> W(m_, 0.0);
    for (int h = 0; h < T_; ++h) {
      const double a = alpha[h];
      if (a == 0.0) continue;
      const double* row = rsum.data() + static_cast<size_t>(h) * m_;
      for (int e = 0; e < m_; ++e) W[e] += a * row[e];
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_);
    const Eigen::VectorXd& u = f.U1.col(r);
    for (int e = 0; e < m_; ++e) {
      const auto [j, jp] = pairs_[e];
      g[j] += W[e] * u[jp];
      g[jp] += W[e] * u[j];
    }
    return -g / N_;
  }
  // -(w_r / N) Phi^T q with q_h = sum_e rsum(h,e) u1r_j u1r_j'
  Eigen::VectorXd q(T_);
  std::vector<double> outer(m_);
  const Eigen::VectorXd& u = f.U1.col(r);
  for (int e = 0; e < m_; ++e) {
    const auto [j, jp] = pairs_[e];
    outer[e] = u[j] * u[jp];
  }
  for (int h = 0; h < T_; ++h) {
    const double* row = rsum.data() + static_cast<size_t>(h) * m_;
    double s = 0.0;
    for (int e = 0; e < m_; ++e) s += row[e] * outer[e];
    q[h] = s;
  }
  return -(f.w[r] / N_) * (Phi_.transpose() * q);
}

std::vector<double> LikelihoodEngine::grad_gamma_packed(
    const std::vector<double>& S) const {
  // g[(l*m + e)*K + k] = -(1/N) sum_h S(h,l,e) Phi(h,k)
  std::vector<double> g(static_cast<size_t>(p_) * m_ * K_, 0.0);
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int l = 0; l < p_; ++l) {
    Eigen::Map<const RowMajor, 0, Eigen::OuterStride<>> Sl(
        S.data() + static_cast<size_t>(l) * m_, T_, m_,
        Eigen::OuterStride<>(static_cast<long>(p_) * m_));
    Eigen::Map<RowMajor> Gl(g.data() + static_cast<size_t>(l) * m_ * K_, m_, K_);
    Gl.noalias() = (-1.0 / N_) * (Sl.transpose() * Phi_);
  }
  return g;
}

double LikelihoodEngine::penalty_packed(const std::vector<double>& gamma) const {
  double s = 0.0;
  const size_t fibers = static_cast<size_t>(p_) * m_;
  for (size_t f = 0; f < fibers; ++f) {
    const double* v = gamma.data() + f * K_;
    double q = 0.0;
    for (int k = 0; k < K_; ++k) q += v[k] * v[k];
    s += std::sqrt(q);
  }
  return 2.0 * s;  // ordered-pair sum counts each unordered fiber twice
}

double LikelihoodEngine::max_abs_eta(const std::vector<double>& M0,
                                     const std::vector<double>& C) const {
  double mx = 0.0;
  std::vector<double> eta(m_);
  for (int h = 0; h < T_; ++h)
    for (int i = 0; i < N_; ++i) {
      const double* m0row = M0.data() + static_cast<size_t>(h) * m_;
      std::memcpy(eta.data(), m0row, sizeof(double) * m_);
      for (int l = 0; l < p_; ++l) {
        const double x = X_(i, l);
        const double* crow = C.data() + (static_cast<size_t>(l) * T_ + h) * m_;
        for (int e = 0; e < m_; ++e) eta[e] += x * crow[e];
      }
      for (int e = 0; e < m_; ++e) mx = std::max(mx, std::fabs(eta[e]));
    }
  return mx;
}

double LikelihoodEngine::lambda_max_xtx_over_n() const {
  if (p_ == 0) return 0.0;
  Eigen::MatrixXd M = (X_.transpose() * X_) / static_cast<double>(N_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  return es.eigenvalues().maxCoeff();
}

double LikelihoodEngine::max_phi_row_sqnorm() const {
  double mx = 0.0;
  for (int h = 0; h < T_; ++h) mx = std::max(mx, Phi_.row(h).squaredNorm());
  return mx;
}

}  // namespace dnetreg

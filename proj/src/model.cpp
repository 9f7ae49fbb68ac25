#include "dnetreg/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dnetreg/engine.hpp"

namespace dnetreg {

void ModelParams::validate() const {
  baseline.validate();
  if (slopes.p > 0) {
    if (slopes.n != baseline.n() || slopes.K != baseline.K())
      throw std::invalid_argument("ModelParams: slope tensor shape mismatch");
  }
}

Eigen::MatrixXd linear_predictor(const ModelParams& params,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& phi_t) {
  if (x.size() != params.slopes.p && !(params.slopes.p == 0 && x.size() == 0))
    throw std::invalid_argument("linear_predictor: covariate length mismatch");
  if (phi_t.size() != params.baseline.K())
    throw std::invalid_argument("linear_predictor: basis length mismatch");
  Eigen::MatrixXd eta = mode3_product(cp_reconstruct(params.baseline), phi_t);
  for (int l = 0; l < params.slopes.p; ++l)
    eta += x[l] * mode3_product(params.slopes.slice(l), phi_t);
  return eta;
}

double neg_loglik(const ModelParams& params, const DynamicNetworkDataset& data,
                  const SplineBasis& basis) {
  LikelihoodEngine eng(data, basis);
  const auto gamma = eng.pack_gamma(params.slopes);
  return eng.loss(eng.build_m0(params.baseline), eng.build_c(gamma));
}

double penalty(const Tensor4& G) {
  double s = 0.0;
  for (int l = 0; l < G.p; ++l)
    for (int j = 0; j < G.n; ++j)
      for (int jp = 0; jp < G.n; ++jp) {
        if (j == jp) continue;
        double q = 0.0;
        for (int k = 0; k < G.K; ++k) {
          const double v = G.at(j, jp, k, l);
          q += v * v;
        }
        s += std::sqrt(q);
      }
  return s;
}

Eigen::VectorXd grad_u1r(const ModelParams& params,
                         const DynamicNetworkDataset& data,
                         const SplineBasis& basis, int r) {
  LikelihoodEngine eng(data, basis);
  const auto gamma = eng.pack_gamma(params.slopes);
  std::vector<double> rsum;
  eng.loss_rsum(eng.build_m0(params.baseline), eng.build_c(gamma), rsum);
  return eng.grad_factor(params.baseline, r, /*node_mode=*/true, rsum);
}

Eigen::VectorXd grad_u3r(const ModelParams& params,
                         const DynamicNetworkDataset& data,
                         const SplineBasis& basis, int r) {
  LikelihoodEngine eng(data, basis);
  const auto gamma = eng.pack_gamma(params.slopes);
  std::vector<double> rsum;
  eng.loss_rsum(eng.build_m0(params.baseline), eng.build_c(gamma), rsum);
  return eng.grad_factor(params.baseline, r, /*node_mode=*/false, rsum);
}

Tensor4 grad_gamma(const ModelParams& params, const DynamicNetworkDataset& data,
                   const SplineBasis& basis) {
  LikelihoodEngine eng(data, basis);
  const auto gamma = eng.pack_gamma(params.slopes);
  std::vector<double> S;
  eng.loss_xres(eng.build_m0(params.baseline), eng.build_c(gamma), S);
  auto g = eng.grad_gamma_packed(S);
  // mirrored entries each carry half of the packed derivative
  for (double& v : g) v *= 0.5;
  return eng.unpack_gamma(g);
}

}  // namespace dnetreg

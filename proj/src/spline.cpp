#include "dnetreg/spline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dnetreg {

SplineBasis::SplineBasis(int K, int degree) : K_(K), degree_(degree) {
  if (degree < 0) throw std::invalid_argument("SplineBasis: negative degree");
  if (K < degree + 1)
    throw std::invalid_argument("SplineBasis: K must be >= degree + 1, got K=" +
                                std::to_string(K) + " degree=" +
                                std::to_string(degree));
  knots_.resize(K + degree + 1);
  const int spans = K - degree;  // number of polynomial spans on [0,1]
  for (int i = 0; i <= degree; ++i) knots_[i] = 0.0;
  for (int i = 1; i < spans; ++i)
    knots_[degree + i] = static_cast<double>(i) / spans;
  for (int i = K; i < K + degree + 1; ++i) knots_[i] = 1.0;
}

Eigen::VectorXd SplineBasis::eval(double t) const {
  if (t < 0.0 || t > 1.0)
    throw std::invalid_argument("SplineBasis::eval: t=" + std::to_string(t) +
                                " outside [0,1]");
  const int d = degree_;
  // span index mu with knots[mu] <= t < knots[mu+1]; t == 1 lands in the
  // last nonempty span so the basis is right-closed
  int mu = K_ - 1;
  if (t < 1.0) {
    mu = d;
    while (mu < K_ - 1 && t >= knots_[mu + 1]) ++mu;
  }
  // Cox-de Boor triangle: N[j] = B_{mu-d+j, d}(t) for j = 0..d
  std::vector<double> N(d + 1, 0.0);
  N[0] = 1.0;
  std::vector<double> left(d + 1), right(d + 1);
  for (int lvl = 1; lvl <= d; ++lvl) {
    left[lvl] = t - knots_[mu + 1 - lvl];
    right[lvl] = knots_[mu + lvl] - t;
    double saved = 0.0;
    for (int j = 0; j < lvl; ++j) {
      const double denom = right[j + 1] + left[lvl - j];
      const double tmp = denom != 0.0 ? N[j] / denom : 0.0;
      N[j] = saved + right[j + 1] * tmp;
      saved = left[lvl - j] * tmp;
    }
    N[lvl] = saved;
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(K_);
  for (int j = 0; j <= d; ++j) phi[mu - d + j] = N[j];
  return phi;
}

Eigen::MatrixXd SplineBasis::basis_matrix(const std::vector<double>& grid) const {
  Eigen::MatrixXd M(static_cast<long>(grid.size()), K_);
  for (size_t h = 0; h < grid.size(); ++h) M.row(h) = eval(grid[h]).transpose();
  return M;
}

}  // namespace dnetreg

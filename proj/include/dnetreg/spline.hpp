#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dnetreg {

/// Clamped B-spline basis of dimension K on [0, 1] with equally spaced
/// interior knots. Evaluation uses the Cox-de Boor recursion and is
/// right-closed at t = 1 (the last basis function equals 1 there).
class SplineBasis {
 public:
  /// K >= degree + 1 required. degree 0 gives a piecewise-constant basis.
  SplineBasis(int K, int degree = 3);

  int dimension() const { return K_; }
  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }

  /// phi(t); throws if t is outside [0, 1].
  Eigen::VectorXd eval(double t) const;

  /// Rows h = phi(grid[h]); the T x K design matrix of the time grid.
  Eigen::MatrixXd basis_matrix(const std::vector<double>& grid) const;

 private:
  int K_;
  int degree_;
  std::vector<double> knots_;  // length K + degree + 1
};

}  // namespace dnetreg

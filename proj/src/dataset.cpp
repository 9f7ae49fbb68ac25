#include "dnetreg/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dnetreg {

void standardize_columns(Eigen::MatrixXd& X) {
  const long N = X.rows();
  if (N < 2) throw std::invalid_argument("standardize_columns: need N >= 2");
  for (long c = 0; c < X.cols(); ++c) {
    const double mean = X.col(c).mean();
    X.col(c).array() -= mean;
    const double sd = std::sqrt(X.col(c).squaredNorm() / (N - 1));
    if (sd <= 0.0)
      throw std::invalid_argument("standardize_columns: column " +
                                  std::to_string(c) + " is constant");
    X.col(c) /= sd;
  }
}

DynamicNetworkDataset DynamicNetworkDataset::subset(
    const std::vector<int>& subjects) const {
  DynamicNetworkDataset out;
  out.N = static_cast<int>(subjects.size());
  out.n = n;
  out.T = T;
  out.p = p;
  out.family = family;
  out.time_grid = time_grid;
  out.X.resize(out.N, p);
  out.adjacency.reserve(subjects.size());
  for (size_t r = 0; r < subjects.size(); ++r) {
    const int i = subjects[r];
    if (i < 0 || i >= N)
      throw std::out_of_range("subset: subject index out of range");
    out.X.row(r) = X.row(i);
    out.adjacency.push_back(adjacency[i]);
  }
  if (p > 0) standardize_columns(out.X);
  return out;
}

void DynamicNetworkDataset::validate() const {
  if (N <= 0 || n <= 1 || T <= 0)
    throw std::invalid_argument("dataset: need N >= 1, n >= 2, T >= 1");
  if (static_cast<int>(time_grid.size()) != T)
    throw std::invalid_argument("dataset: time grid length != T");
  for (double t : time_grid)
    if (t < 0.0 || t > 1.0)
      throw std::invalid_argument("dataset: time point outside [0,1]");
  if (X.rows() != N || X.cols() != p)
    throw std::invalid_argument("dataset: covariate matrix shape mismatch");
  if (static_cast<int>(adjacency.size()) != N)
    throw std::invalid_argument("dataset: adjacency subject count != N");
  const size_t want = static_cast<size_t>(T) * n * n;
  for (int i = 0; i < N; ++i) {
    if (adjacency[i].size() != want)
      throw std::invalid_argument(
          "dataset: subject " + std::to_string(i) + " has " +
          std::to_string(adjacency[i].size()) + " values, expected " +
          std::to_string(want));
    for (int h = 0; h < T; ++h)
      for (int j = 0; j < n; ++j) {
        if (adj(i, h, j, j) != 0.0)
          throw std::invalid_argument("dataset: nonzero diagonal at subject " +
                                      std::to_string(i));
        for (int jp = j + 1; jp < n; ++jp) {
          const double a = adj(i, h, j, jp);
          if (a != adj(i, h, jp, j))
            throw std::invalid_argument("dataset: asymmetric adjacency at subject " +
                                        std::to_string(i));
          if (!valid_edge_value(family, a))
            throw std::invalid_argument(
                "dataset: edge value " + std::to_string(a) +
                " inadmissible for family " + family_to_string(family));
        }
      }
  }
  // covariates must arrive standardized
  for (int c = 0; c < p; ++c) {
    const double mean = X.col(c).mean();
    const double sd = std::sqrt(X.col(c).squaredNorm() / std::max(1, N - 1));
    if (std::fabs(mean) > 1e-8 || std::fabs(sd - 1.0) > 1e-8)
      throw std::invalid_argument("dataset: covariate column " +
                                  std::to_string(c) + " not standardized");
  }
}

}  // namespace dnetreg

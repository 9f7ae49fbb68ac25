#include "dnetreg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dnetreg/parallel.hpp"
#include "dnetreg/rng.hpp"

namespace dnetreg {

SlidingWindowResult sliding_windows(const Eigen::MatrixXd& signal, int window,
                                    int stride) {
  const int n = static_cast<int>(signal.rows());
  const int S = static_cast<int>(signal.cols());
  if (window < 2 || window > S)
    throw std::invalid_argument("sliding_windows: window must be in [2, S]");
  if (stride < 1) throw std::invalid_argument("sliding_windows: stride < 1");

  const int T = (S - window) / stride + 1;
  SlidingWindowResult out;
  out.correlations.reserve(T);
  for (int w = 0; w < T; ++w) {
    const Eigen::MatrixXd block = signal.middleCols(w * stride, window);
    Eigen::VectorXd mean = block.rowwise().mean();
    Eigen::MatrixXd centered = block.colwise() - mean;
    Eigen::VectorXd sd = centered.rowwise().norm();
    std::vector<bool> flat(n, false);
    for (int j = 0; j < n; ++j)
      if (sd[j] <= 0.0) {
        flat[j] = true;
        ++out.n_flagged;
      }
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
    for (int j = 0; j < n; ++j)
      for (int jp = j + 1; jp < n; ++jp) {
        double c = 0.0;
        if (!flat[j] && !flat[jp])
          c = centered.row(j).dot(centered.row(jp)) / (sd[j] * sd[jp]);
        C(j, jp) = c;
        C(jp, j) = c;
      }
    out.correlations.push_back(std::move(C));
  }
  return out;
}

Eigen::MatrixXi binarize(const Eigen::MatrixXd& C, double tau) {
  if (tau <= -1.0 || tau >= 1.0)
    throw std::invalid_argument("binarize: tau must be in (-1, 1)");
  const int n = static_cast<int>(C.rows());
  Eigen::MatrixXi A = Eigen::MatrixXi::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp)
      A(j, jp) = (j != jp && C(j, jp) > tau) ? 1 : 0;
  return A;
}

namespace {

double kmeans_once(const Eigen::MatrixXd& F, int k, Rng& rng,
                   std::vector<int>& labels) {
  const int n = static_cast<int>(F.rows());
  const int d = static_cast<int>(F.cols());
  Eigen::MatrixXd centers(k, d);

  // k-means++ seeding
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.uniform_int(n));
  centers.row(0) = F.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d2 = (F.row(i) - centers.row(c - 1)).squaredNorm();
      dist2[i] = std::min(dist2[i], d2);
      total += dist2[i];
    }
    int pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dist2[i];
        if (u <= acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_int(n));
    }
    centers.row(c) = F.row(pick);
  }

  labels.assign(n, 0);
  double wcss = 0.0;
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    wcss = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d2 = (F.row(i) - centers.row(c)).squaredNorm();
        if (d2 < bd) {
          bd = d2;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
      wcss += bd;
    }
    // recompute centers; an empty cluster reseeds to the farthest point
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(labels[i]) += F.row(i);
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
      } else {
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d2 = (F.row(i) - centers.row(labels[i])).squaredNorm();
          if (d2 > fd) {
            fd = d2;
            far = i;
          }
        }
        centers.row(c) = F.row(far);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return wcss;
}

}  // namespace

std::vector<int> cluster_regions(const Eigen::MatrixXd& M, int k,
                                 int embed_dim, uint64_t seed) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n) throw std::invalid_argument("cluster_regions: not square");
  if (k < 2) throw std::invalid_argument("cluster_regions: k must be >= 2");
  if (k > n) throw std::invalid_argument("cluster_regions: k exceeds n");
  if (embed_dim < 1 || embed_dim > n)
    throw std::invalid_argument("cluster_regions: embed_dim out of range");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
  const Eigen::MatrixXd F =
      svd.matrixU().leftCols(embed_dim) *
      svd.singularValues().head(embed_dim).asDiagonal();

  std::vector<int> best_labels;
  double best_wcss = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 20; ++restart) {
    Rng rng = Rng::derive(seed, restart);
    std::vector<int> labels;
    const double wcss = kmeans_once(F, k, rng, labels);
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best_labels = labels;
    }
  }
  return best_labels;
}

std::vector<std::pair<int, int>> GoiSpec::cells(int n) const {
  std::set<std::pair<int, int>> cells;
  auto check = [n](int v) {
    if (v < 0 || v >= n)
      throw std::invalid_argument("GoiSpec: node index out of range");
  };
  switch (kind) {
    case Kind::kWithin:
      for (int a : nodes_a)
        for (int b : nodes_a) {
          check(a);
          check(b);
          if (a != b) cells.insert({a, b});
        }
      break;
    case Kind::kBetween:
      for (int a : nodes_a)
        for (int b : nodes_b) {
          check(a);
          check(b);
          if (a != b) {
            cells.insert({a, b});
            cells.insert({b, a});
          }
        }
      break;
    case Kind::kPairs:
      for (auto [a, b] : pairs) {
        check(a);
        check(b);
        if (a != b) cells.insert({a, b});
      }
      break;
  }
  if (cells.empty()) throw std::invalid_argument("GoiSpec: empty cell set");
  return {cells.begin(), cells.end()};
}

GoiValue goi_distance(const Eigen::MatrixXd& D, const GoiSpec& spec) {
  GoiValue out;
  out.name = spec.name;
  double sum = 0.0;
  int positive = 0;
  for (auto [a, b] : spec.cells(static_cast<int>(D.rows()))) {
    sum += D(a, b);
    positive += D(a, b) > 0.0;
  }
  if (positive == 0) {
    out.value = 0.0;
    out.empty = true;
  } else {
    out.value = sum / positive;
  }
  return out;
}

namespace {

// fiber-distance matrix between the first slope tensors of two fits
Eigen::MatrixXd slope_distance(const Tensor4& A, const Tensor4& B) {
  const int n = A.n, K = A.K;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp) {
      if (j == jp) continue;
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        const double d = A.at(j, jp, k, 0) - B.at(j, jp, k, 0);
        s += d * d;
      }
      D(j, jp) = std::sqrt(s);
    }
  return D;
}

Eigen::MatrixXd group_difference(const DynamicNetworkDataset& data,
                                 const std::vector<int>& labels,
                                 const FitOptions& opts, uint64_t seed) {
  std::vector<int> ga, gb;
  for (int i = 0; i < data.N; ++i) (labels[i] == 0 ? ga : gb).push_back(i);
  FitOptions o = opts;
  o.seed = seed;
  const FitResult fa = fit(data.subset(ga), o);
  o.seed = seed ^ 0x5851f42d4c957f2dULL;
  const FitResult fb = fit(data.subset(gb), o);
  return slope_distance(fa.params.slopes, fb.params.slopes);
}

}  // namespace

PermutationReport permutation_test(const DynamicNetworkDataset& data,
                                   const std::vector<int>& labels, int n_perm,
                                   const FitOptions& opts, double quantile,
                                   const std::vector<GoiSpec>& gois) {
  if (static_cast<int>(labels.size()) != data.N)
    throw std::invalid_argument("permutation_test: label length != N");
  if (n_perm < 1) throw std::invalid_argument("permutation_test: n_perm < 1");
  if (quantile <= 0.0 || quantile > 1.0)
    throw std::invalid_argument("permutation_test: quantile out of (0, 1]");
  int n0 = 0, n1 = 0;
  for (int v : labels) {
    if (v != 0 && v != 1)
      throw std::invalid_argument("permutation_test: labels must be 0/1");
    (v == 0 ? n0 : n1)++;
  }
  if (n0 == 0 || n1 == 0)
    throw std::invalid_argument("permutation_test: a group is empty");
  if (data.p == 0)
    throw std::invalid_argument("permutation_test: model has no slopes");

  PermutationReport report;
  report.D_obs = group_difference(data, labels, opts, opts.seed);

  std::vector<Eigen::MatrixXd> perms(n_perm);
  std::vector<uint8_t> ok(n_perm, 0);
  parallel_for(n_perm, [&](int i) {
    Rng rng = Rng::derive(opts.seed, 1000 + i);
    std::vector<int> shuffled = labels;
    rng.shuffle(shuffled);
    try {
      perms[i] = group_difference(data, shuffled, opts,
                                  opts.seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
      ok[i] = 1;
    } catch (const std::exception& e) {
      std::cerr << "[dnetreg] warning: permutation " << i
                << " dropped: " << e.what() << "\n";
    }
  });
  for (int i = 0; i < n_perm; ++i)
    if (ok[i])
      report.D_per.push_back(std::move(perms[i]));
    else
      ++report.n_dropped;
  if (report.n_dropped > 0.2 * n_perm)
    throw std::runtime_error("permutation_test: more than 20% of permutation "
                             "fits failed (" + std::to_string(report.n_dropped) +
                             " of " + std::to_string(n_perm) + ")");

  const int kept = static_cast<int>(report.D_per.size());
  const int n = data.n;
  report.D_per_mean = Eigen::MatrixXd::Zero(n, n);
  for (const auto& D : report.D_per) report.D_per_mean += D;
  report.D_per_mean /= std::max(1, kept);

  // the flag threshold scales with the kept permutation count
  const int need = static_cast<int>(std::ceil(quantile * kept - 1e-9));
  report.S_flag = Eigen::MatrixXi::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int jp = 0; jp < n; ++jp) {
      if (j == jp) continue;
      int count = 0;
      for (const auto& D : report.D_per)
        count += report.D_obs(j, jp) > D(j, jp);
      report.S_flag(j, jp) = count >= need ? 1 : 0;
    }

  for (const auto& spec : gois) {
    report.goi_obs.push_back(goi_distance(report.D_obs, spec));
  }
  report.goi_per.resize(kept);
  for (int i = 0; i < kept; ++i)
    for (const auto& spec : gois)
      report.goi_per[i].push_back(goi_distance(report.D_per[i], spec));

  return report;
}

}  // namespace dnetreg

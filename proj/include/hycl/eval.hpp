#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hycl/common.hpp"
#include "hycl/hypergraph.hpp"
#include "hycl/rng.hpp"

namespace hycl {

struct ProbeConfig {
  double l2_coefficient = 1e-3;
  double probe_lr = 0.01;
  Index probe_epochs = 2000;

  void validate() const {
    check_config(l2_coefficient >= 0, "ProbeConfig: l2_coefficient must be nonnegative");
    check_config(probe_lr > 0, "ProbeConfig: probe_lr must be positive");
    check_config(probe_epochs >= 1, "ProbeConfig: probe_epochs must be >= 1");
  }
};

namespace detail {

inline void softmax_rows_inplace(Matrix<double>& logits) {
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - mx).exp();
    logits.row(r) /= logits.row(r).sum();
  }
}

}  // namespace detail

// Multinomial logistic regression on frozen embeddings: full-batch gradient
// descent from a zero initialization, L2 penalty on the weights only. Inputs
// are standardized per dimension on the training rows so the step size
// behaves the same at any embedding scale; the affine change is absorbed by
// the linear layer. Returns the fraction of correct test predictions.
inline double linear_probe(const Matrix<double>& emb, const std::vector<int>& labels,
                           const Split& split, int num_classes, const ProbeConfig& cfg) {
  cfg.validate();
  check_contract(static_cast<Index>(labels.size()) == emb.rows(), "linear_probe: label count mismatch");
  check_config(!split.test.empty(), "linear_probe: empty test set");
  check_contract(num_classes >= 2, "linear_probe: need at least 2 classes");

  const Index n_train = static_cast<Index>(split.train.size());
  const Index dim = emb.cols();
  Matrix<double> x(n_train, dim);
  std::vector<int> y(split.train.size());
  for (Index r = 0; r < n_train; ++r) {
    x.row(r) = emb.row(split.train[static_cast<std::size_t>(r)]);
    y[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(split.train[static_cast<std::size_t>(r)])];
  }

  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd scale(dim);
  for (Index c = 0; c < dim; ++c) {
    const double var = (x.col(c).array() - mean(c)).square().mean();
    scale(c) = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  for (Index r = 0; r < n_train; ++r) x.row(r) = (x.row(r) - mean).cwiseProduct(scale);

  Matrix<double> w = Matrix<double>::Zero(dim, num_classes);
  Matrix<double> b = Matrix<double>::Zero(1, num_classes);
  const double inv_n = 1.0 / static_cast<double>(n_train);
  for (Index epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    Matrix<double> p = x * w;
    p.rowwise() += b.row(0);
    detail::softmax_rows_inplace(p);
    for (Index r = 0; r < n_train; ++r) p(r, y[static_cast<std::size_t>(r)]) -= 1.0;
    Matrix<double> gw = inv_n * (x.transpose() * p) + 2.0 * cfg.l2_coefficient * w;
    Matrix<double> gb = inv_n * p.colwise().sum();
    w -= cfg.probe_lr * gw;
    b -= cfg.probe_lr * gb;
  }

  Index correct = 0;
  for (const Index i : split.test) {
    Eigen::RowVectorXd row = (emb.row(i) - mean).cwiseProduct(scale);
    Eigen::RowVectorXd logits = row * w + b.row(0);
    Index arg = 0;
    logits.maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.test.size());
}

struct ClusterResult {
  std::vector<Index> assignments;
  Matrix<double> centers;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after each Lloyd update
};

namespace detail {

inline Index nearest_center(const Matrix<double>& points, const Matrix<double>& centers, Index row,
                            double* dist_out = nullptr) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centers.rows(); ++c) {
    const double d = (points.row(row) - centers.row(c)).squaredNorm();
    if (d < best_d) {  // ties resolve to the smallest index
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

}  // namespace detail

// k-means++ seeding followed by Lloyd iterations until the assignments reach
// a fixpoint (or 300 rounds). Emptied clusters are reseeded to the point
// farthest from its current center.
inline ClusterResult kmeans(const Matrix<double>& points, Index k, std::uint64_t seed,
                            Index max_iterations = 300) {
  const Index n = points.rows();
  check_config(k >= 1 && k <= n, "kmeans: k must lie in [1, n]");
  Rng rng(Rng::derive(seed, "kmeans"));

  Matrix<double> centers(k, points.cols());
  centers.row(0) = points.row(rng.next_index(n));
  Vector<double> min_d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = min_d2.sum();
    Index pick = 0;
    if (total > 0) {
      const double target = rng.next_double() * total;
      double acc = 0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_index(n);
    }
    centers.row(c) = points.row(pick);
    min_d2 = min_d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  ClusterResult result;
  result.assignments.assign(static_cast<std::size_t>(n), 0);
  for (Index it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    double pass_inertia = 0;
    for (Index i = 0; i < n; ++i) {
      double di = 0;
      const Index a = detail::nearest_center(points, centers, i, &di);
      pass_inertia += di;
      if (a != result.assignments[static_cast<std::size_t>(i)]) changed = true;
      result.assignments[static_cast<std::size_t>(i)] = a;
    }
    result.inertia_trace.push_back(pass_inertia);
    if (!changed) break;

    Matrix<double> sums = Matrix<double>::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(result.assignments[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(result.assignments[static_cast<std::size_t>(i)])];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // reseed to the point farthest from its assigned center
        Index far = 0;
        double far_d = -1;
        for (Index i = 0; i < n; ++i) {
          const double d =
              (points.row(i) - centers.row(result.assignments[static_cast<std::size_t>(i)])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
      }
    }
  }

  result.inertia = 0;
  for (Index i = 0; i < n; ++i) {
    double d = 0;
    result.assignments[static_cast<std::size_t>(i)] = detail::nearest_center(points, centers, i, &d);
    result.inertia += d;
  }
  result.centers = std::move(centers);
  return result;
}

namespace detail {

inline Matrix<double> contingency(const std::vector<int>& a, const std::vector<Index>& b, Index ka,
                                  Index kb) {
  Matrix<double> c = Matrix<double>::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) c(a[i], b[i]) += 1.0;
  return c;
}

inline double entropy_from_counts(const Vector<double>& counts, double n) {
  double h = 0;
  for (Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) {
      const double p = counts[i] / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace detail

// Normalized mutual information with arithmetic-mean normalization,
// I(U;V) / ((H(U) + H(V)) / 2), and 0 log 0 = 0. Two trivial partitions agree
// perfectly (1); one trivial against one informative partition scores 0.
inline double nmi(const std::vector<int>& true_labels, const std::vector<Index>& assignments) {
  check_contract(true_labels.size() == assignments.size(), "nmi: length mismatch");
  check_contract(!true_labels.empty(), "nmi: empty inputs");
  Index ka = 0, kb = 0;
  for (const int v : true_labels) ka = std::max<Index>(ka, v + 1);
  for (const Index v : assignments) kb = std::max<Index>(kb, v + 1);
  const double n = static_cast<double>(true_labels.size());
  const Matrix<double> c = detail::contingency(true_labels, assignments, ka, kb);
  const Vector<double> row = c.rowwise().sum();
  const Vector<double> col = c.colwise().sum();
  const double hu = detail::entropy_from_counts(row, n);
  const double hv = detail::entropy_from_counts(col, n);
  if (hu == 0.0 && hv == 0.0) return 1.0;
  if (hu == 0.0 || hv == 0.0) return 0.0;
  double mi = 0;
  for (Index i = 0; i < ka; ++i)
    for (Index j = 0; j < kb; ++j)
      if (c(i, j) > 0) mi += (c(i, j) / n) * std::log(n * c(i, j) / (row[i] * col[j]));
  return mi / (0.5 * (hu + hv));
}

// Pairwise F1 over all unordered point pairs: predicted-positive iff the pair
// shares a cluster, true-positive iff it also shares a class.
inline double pairwise_f1(const std::vector<int>& true_labels, const std::vector<Index>& assignments) {
  check_contract(true_labels.size() == assignments.size(), "pairwise_f1: length mismatch");
  check_contract(true_labels.size() >= 2, "pairwise_f1: need at least 2 points");
  Index ka = 0, kb = 0;
  for (const int v : true_labels) ka = std::max<Index>(ka, v + 1);
  for (const Index v : assignments) kb = std::max<Index>(kb, v + 1);
  const Matrix<double> c = detail::contingency(true_labels, assignments, ka, kb);
  auto pairs2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double tp = 0;
  for (Index i = 0; i < ka; ++i)
    for (Index j = 0; j < kb; ++j) tp += pairs2(c(i, j));
  double pred_pos = 0;
  for (Index j = 0; j < kb; ++j) pred_pos += pairs2(c.col(j).sum());
  double true_pos = 0;
  for (Index i = 0; i < ka; ++i) true_pos += pairs2(c.row(i).sum());
  if (pred_pos == 0.0) return 0.0;
  const double precision = tp / pred_pos;
  const double recall = true_pos > 0 ? tp / true_pos : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// Mean silhouette with Euclidean distances; singleton-cluster points score 0,
// as do points with a == b == 0.
inline double silhouette(const Matrix<double>& points, const std::vector<Index>& assignments) {
  const Index n = points.rows();
  check_contract(static_cast<Index>(assignments.size()) == n, "silhouette: length mismatch");
  Index k = 0;
  for (const Index a : assignments) k = std::max(k, a + 1);
  check_config(k >= 2, "silhouette: need at least 2 clusters");
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (const Index a : assignments) ++counts[static_cast<std::size_t>(a)];
  for (const Index c : counts) check_config(c > 0, "silhouette: empty cluster");

  double total = 0;
  std::vector<double> mean_dist(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    const Index own = assignments[static_cast<std::size_t>(i)];
    if (counts[static_cast<std::size_t>(own)] == 1) continue;  // singleton contributes 0
    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      mean_dist[static_cast<std::size_t>(assignments[static_cast<std::size_t>(j)])] +=
          (points.row(i) - points.row(j)).norm();
    }
    const double a =
        mean_dist[static_cast<std::size_t>(own)] / static_cast<double>(counts[static_cast<std::size_t>(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, mean_dist[static_cast<std::size_t>(c)] / static_cast<double>(counts[static_cast<std::size_t>(c)]));
    }
    const double denom = std::max(a, b);
    total += denom > 0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

struct ClassificationSummary {
  double mean_accuracy = 0;
  double std_accuracy = 0;
  std::vector<double> per_split;
};

inline ClassificationSummary evaluate_classification(const Matrix<double>& emb,
                                                     const std::vector<int>& labels, int num_classes,
                                                     const std::vector<Split>& splits,
                                                     const ProbeConfig& cfg) {
  check_config(!splits.empty(), "evaluate_classification: no splits given");
  ClassificationSummary out;
  for (const Split& s : splits) out.per_split.push_back(linear_probe(emb, labels, s, num_classes, cfg));
  const double n = static_cast<double>(out.per_split.size());
  for (const double a : out.per_split) out.mean_accuracy += a;
  out.mean_accuracy /= n;
  double var = 0;
  for (const double a : out.per_split) var += (a - out.mean_accuracy) * (a - out.mean_accuracy);
  out.std_accuracy = out.per_split.size() > 1 ? std::sqrt(var / n) : 0.0;
  return out;
}

struct ClusteringSummary {
  double mean_nmi = 0;
  double mean_f1 = 0;
  std::vector<double> per_run_nmi;
  std::vector<double> per_run_f1;
};

inline ClusteringSummary evaluate_clustering(const Matrix<double>& emb, const std::vector<int>& labels,
                                             Index k, Index runs, std::uint64_t seed) {
  check_config(runs >= 1, "evaluate_clustering: runs must be >= 1");
  ClusteringSummary out;
  for (Index r = 0; r < runs; ++r) {
    const ClusterResult c = kmeans(emb, k, Rng::derive(seed, "cluster_run", static_cast<std::uint64_t>(r)));
    out.per_run_nmi.push_back(nmi(labels, c.assignments));
    out.per_run_f1.push_back(pairwise_f1(labels, c.assignments));
  }
  for (const double v : out.per_run_nmi) out.mean_nmi += v;
  for (const double v : out.per_run_f1) out.mean_f1 += v;
  out.mean_nmi /= static_cast<double>(runs);
  out.mean_f1 /= static_cast<double>(runs);
  return out;
}

}  // namespace hycl

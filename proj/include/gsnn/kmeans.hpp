#pragma once

// k-means clustering used to build grouped dictionaries: k-means++ seeding,
// Lloyd iterations, and per-group centroid concatenation.

#include "gsnn/numcore.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsnn {

template <typename Scalar>
struct Clustering {
  MatrixX<Scalar> centroids;          // k x dim
  std::vector<int> assignments;       // one per point
  Scalar inertia = 0;                 // sum of squared distances to assigned centroid
  int iterations = 0;
  std::vector<Scalar> inertia_trace;  // inertia after each assignment step
  std::vector<int> cluster_sizes;
};

template <typename Scalar>
Eigen::Index count_distinct_rows(const MatrixX<Scalar>& points) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  Eigen::Index distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (less(idx[i - 1], idx[i])) ++distinct;
  }
  return distinct;
}

/// k-means++ seeding: first centre uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen centre.
template <typename Scalar>
MatrixX<Scalar> seed_plusplus(const MatrixX<Scalar>& points, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("seed_plusplus: k must be positive");
  if (count_distinct_rows(points) < k) {
    throw std::invalid_argument("seed_plusplus: need at least " + std::to_string(k) + " distinct points, have " +
                                std::to_string(count_distinct_rows(points)));
  }
  const Eigen::Index n = points.rows();
  MatrixX<Scalar> centres(k, points.cols());
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centres.row(0) = points.row(first);
  VectorX<Scalar> d2 = (points.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const Scalar total = d2.sum();
    const Scalar target = static_cast<Scalar>(rng.uniform()) * total;
    Scalar acc = 0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= Scalar(0)) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centres.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  return centres;
}

namespace detail {

/// Nearest centroid per point (lowest index wins ties); returns the inertia.
template <typename Scalar>
Scalar assign(const MatrixX<Scalar>& points, const MatrixX<Scalar>& centroids, std::vector<int>& out,
              VectorX<Scalar>& dist2) {
  const Eigen::Index n = points.rows();
  out.assign(static_cast<std::size_t>(n), 0);
  dist2.resize(n);
  Scalar inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar best = (points.row(i) - centroids.row(0)).squaredNorm();
    int arg = 0;
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
      const Scalar d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
    dist2[i] = best;
    inertia += best;
  }
  return inertia;
}

}  // namespace detail

/// Lloyd iterations from `init` until the largest centroid move is below `tol`
/// or `max_iter` passes. An empty cluster is moved onto the point that lies
/// farthest from its own centroid.
template <typename Scalar>
Clustering<Scalar> lloyd(const MatrixX<Scalar>& points, const MatrixX<Scalar>& init, int max_iter = 100,
                         Scalar tol = Scalar(1e-6)) {
  if (init.cols() != points.cols()) {
    throw std::invalid_argument("lloyd: centroids have " + std::to_string(init.cols()) + " columns, points have " +
                                std::to_string(points.cols()));
  }
  if (points.rows() == 0 || init.rows() == 0) throw std::invalid_argument("lloyd: empty input");
  const Eigen::Index k = init.rows();
  Clustering<Scalar> result;
  result.centroids = init;
  VectorX<Scalar> dist2;
  for (int it = 1; it <= max_iter; ++it) {
    result.inertia_trace.push_back(detail::assign(points, result.centroids, result.assignments, dist2));
    MatrixX<Scalar> next = MatrixX<Scalar>::Zero(k, points.cols());
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int a = result.assignments[static_cast<std::size_t>(i)];
      next.row(a) += points.row(i);
      ++sizes[static_cast<std::size_t>(a)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= static_cast<Scalar>(sizes[static_cast<std::size_t>(c)]);
      } else {
        Eigen::Index far = 0;
        dist2.maxCoeff(&far);
        next.row(c) = points.row(far);
        dist2[far] = Scalar(0);
      }
    }
    const Scalar move = (next - result.centroids).rowwise().norm().maxCoeff();
    result.centroids = std::move(next);
    result.iterations = it;
    if (move < tol) break;
  }
  result.inertia = detail::assign(points, result.centroids, result.assignments, dist2);
  result.cluster_sizes.assign(static_cast<std::size_t>(k), 0);
  for (int a : result.assignments) ++result.cluster_sizes[static_cast<std::size_t>(a)];
  return result;
}

template <typename Scalar>
Clustering<Scalar> kmeans(const MatrixX<Scalar>& points, int k, Rng& rng, int max_iter = 100, Scalar tol = Scalar(1e-6)) {
  return lloyd(points, seed_plusplus(points, k, rng), max_iter, tol);
}

/// Dictionary of G*g rows; rows [p*g, p*g + g) are the g centroids of
/// group p in descending cluster-size order.
template <typename Scalar>
struct GroupedDictionary {
  MatrixX<Scalar> atoms;
  std::vector<int> group_of_row;
  int groups = 0;
  int group_size = 0;
};

template <typename Scalar>
GroupedDictionary<Scalar> build_dictionary(const std::vector<MatrixX<Scalar>>& grouped_points, int g, Rng& rng) {
  if (grouped_points.empty()) throw std::invalid_argument("build_dictionary: no groups");
  if (g < 1) throw std::invalid_argument("build_dictionary: group size must be positive");
  const Eigen::Index dim = grouped_points.front().cols();
  GroupedDictionary<Scalar> dict;
  dict.groups = static_cast<int>(grouped_points.size());
  dict.group_size = g;
  dict.atoms.resize(static_cast<Eigen::Index>(grouped_points.size()) * g, dim);
  for (std::size_t p = 0; p < grouped_points.size(); ++p) {
    const MatrixX<Scalar>& pts = grouped_points[p];
    if (pts.rows() == 0) throw std::invalid_argument("build_dictionary: group " + std::to_string(p) + " is empty");
    if (pts.cols() != dim) throw std::invalid_argument("build_dictionary: group " + std::to_string(p) + " has wrong dimension");

    MatrixX<Scalar> work = pts;
    if (count_distinct_rows(work) < g) {
      // Top up with jittered resamples so that g distinct seeds exist.
      const Scalar scale = std::max(Scalar(1e-3), Scalar(1e-3) * work.cwiseAbs().maxCoeff());
      std::vector<Eigen::Index> rows;
      while (count_distinct_rows(work) < g) {
        const Eigen::Index src = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(pts.rows())));
        MatrixX<Scalar> grown(work.rows() + 1, dim);
        grown.topRows(work.rows()) = work;
        for (Eigen::Index c = 0; c < dim; ++c) grown(work.rows(), c) = pts(src, c) + static_cast<Scalar>(rng.normal(0.0, 1.0)) * scale;
        work = std::move(grown);
      }
    }
    const Clustering<Scalar> cl = kmeans(work, g, rng);
    std::vector<int> order(static_cast<std::size_t>(g));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return cl.cluster_sizes[static_cast<std::size_t>(a)] > cl.cluster_sizes[static_cast<std::size_t>(b)];
    });
    for (int l = 0; l < g; ++l) {
      dict.atoms.row(static_cast<Eigen::Index>(p) * g + l) = cl.centroids.row(order[static_cast<std::size_t>(l)]);
      dict.group_of_row.push_back(static_cast<int>(p));
    }
  }
  return dict;
}

/// Best of `restarts` independent k-means runs by inertia; the earliest run
/// wins ties.
template <typename Scalar>
Clustering<Scalar> kmeans_best_of(const MatrixX<Scalar>& points, int k, Rng& rng, int restarts, int max_iter = 100,
                                  Scalar tol = Scalar(1e-6)) {
  if (restarts < 1) throw std::invalid_argument("kmeans_best_of: restarts must be at least 1");
  Clustering<Scalar> best = kmeans(points, k, rng, max_iter, tol);
  for (int r = 1; r < restarts; ++r) {
    Clustering<Scalar> c = kmeans(points, k, rng, max_iter, tol);
    if (c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

/// Rows of `points` split by cluster assignment, cluster order.
template <typename Scalar>
std::vector<MatrixX<Scalar>> partition_rows(const MatrixX<Scalar>& points, const std::vector<int>& assignments, int k) {
  if (assignments.size() != static_cast<std::size_t>(points.rows())) throw std::invalid_argument("partition_rows: one assignment per row required");
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] < 0 || assignments[i] >= k) throw std::invalid_argument("partition_rows: assignment out of range");
    rows[static_cast<std::size_t>(assignments[i])].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<MatrixX<Scalar>> out;
  for (const auto& r : rows) {
    MatrixX<Scalar> m(static_cast<Eigen::Index>(r.size()), points.cols());
    for (std::size_t j = 0; j < r.size(); ++j) m.row(static_cast<Eigen::Index>(j)) = points.row(r[j]);
    out.push_back(std::move(m));
  }
  return out;
}

/// Two-level clustering: `groups` coarse k-means clusters (best of `restarts`),
/// then g centroids inside each via build_dictionary.
template <typename Scalar>
GroupedDictionary<Scalar> grouped_dictionary(const MatrixX<Scalar>& points, int groups, int g, Rng& rng, int restarts = 1) {
  const Clustering<Scalar> coarse = kmeans_best_of(points, groups, rng, restarts);
  return build_dictionary(partition_rows(points, coarse.assignments, groups), g, rng);
}

/// Loads dictionary atoms into an encoder: row r of W becomes
/// (atoms_r - center) rescaled to norm `scale` (zero rows stay zero) and
/// b = -W center, so every unit sits at its midpoint on `center`.
template <typename Scalar>
void install_atoms(MatrixX<Scalar>& W, VectorX<Scalar>& b, const MatrixX<Scalar>& atoms, const VectorX<Scalar>& center,
                   Scalar scale) {
  if (atoms.rows() != W.rows() || atoms.cols() != W.cols()) {
    throw std::invalid_argument("install_atoms: atoms " + shape_of(atoms) + " do not match W " + shape_of(W));
  }
  if (center.size() != atoms.cols()) throw std::invalid_argument("install_atoms: center has wrong dimension");
  if (!(scale > Scalar(0))) throw std::invalid_argument("install_atoms: scale must be positive");
  for (Eigen::Index r = 0; r < atoms.rows(); ++r) {
    VectorX<Scalar> v = atoms.row(r).transpose() - center;
    const Scalar norm = v.norm();
    if (norm > Scalar(0)) v *= scale / norm;
    W.row(r) = v.transpose();
  }
  b = -(W * center);
}

}  // namespace gsnn

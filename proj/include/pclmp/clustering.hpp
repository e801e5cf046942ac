#pragma once

#include <span>
#include <vector>

#include "pclmp/data.hpp"
#include "pclmp/numerics.hpp"

namespace pclmp {

struct ClusterAssignment {
  // 0..n_clusters-1, or kNoise.
  std::vector<int> labels;
  int n_clusters = 0;

  // Record positions per cluster, ascending.
  std::vector<std::vector<std::size_t>> members() const;
};

// DBSCAN with the Euclidean metric. A core point has at least `min_pts`
// points within `eps` (inclusive, counting itself). Points are scanned in
// index order; clusters are numbered in order of discovery and a border
// point joins the first cluster that reaches it.
ClusterAssignment dbscan(const Matrix& points, double eps, int min_pts);

// Adjusted Rand Index from the contingency table. kNoise entries in either
// labeling are treated as singleton clusters. Two trivial partitions that
// coincide (n < 2, or a zero-variance denominator) score 1.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace pclmp

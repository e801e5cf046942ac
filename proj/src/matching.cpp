#include "pclmp/matching.hpp"

#include <algorithm>
#include <limits>

#include "pclmp/error.hpp"
#include "pclmp/kernels.hpp"

namespace pclmp {

std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows;
  const std::size_t m = cost.cols;
  if (n == 0) return {};
  if (n > m) throw Error(Errc::InvalidParams, "assignment needs rows <= cols");
  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with row/column potentials, 1-based with a
  // virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double CrossModalMatch::total_similarity() const {
  double s = 0.0;
  for (const auto& p : pairs) s += p.similarity;
  return s;
}

CrossModalMatch match_prototypes(const Matrix& visible_centroids, const Matrix& infrared_centroids) {
  if (visible_centroids.rows == 0 || infrared_centroids.rows == 0)
    throw Error(Errc::EmptyMemory, "cannot match an empty centroid memory");
  const Matrix sim = kernels::parallel::similarity(visible_centroids, infrared_centroids);
  const bool visible_smaller = sim.rows <= sim.cols;
  const std::size_t small = visible_smaller ? sim.rows : sim.cols;
  const std::size_t large = visible_smaller ? sim.cols : sim.rows;
  Matrix cost(small, large);
  for (std::size_t i = 0; i < small; ++i)
    for (std::size_t j = 0; j < large; ++j) cost(i, j) = -(visible_smaller ? sim(i, j) : sim(j, i));
  const auto assignment = solve_assignment(cost);

  CrossModalMatch match;
  std::vector<char> vis_used(sim.rows, 0), ir_used(sim.cols, 0);
  for (std::size_t i = 0; i < small; ++i) {
    const std::size_t vi = visible_smaller ? i : assignment[i];
    const std::size_t ri = visible_smaller ? assignment[i] : i;
    match.pairs.push_back({static_cast<int>(vi), static_cast<int>(ri), sim(vi, ri)});
    vis_used[vi] = 1;
    ir_used[ri] = 1;
  }
  std::sort(match.pairs.begin(), match.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.visible < b.visible; });
  for (std::size_t i = 0; i < sim.rows; ++i)
    if (!vis_used[i]) match.unmatched_visible.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < sim.cols; ++j)
    if (!ir_used[j]) match.unmatched_infrared.push_back(static_cast<int>(j));
  return match;
}

UnifiedLabels unify_labels(const ClusterAssignment& visible, const ClusterAssignment& infrared,
                           const CrossModalMatch& match) {
  std::vector<int> vis_map(static_cast<std::size_t>(visible.n_clusters), -1);
  std::vector<int> ir_map(static_cast<std::size_t>(infrared.n_clusters), -1);
  int next = 0;
  auto claim = [](std::vector<int>& map, int cluster, int label) {
    if (cluster < 0 || static_cast<std::size_t>(cluster) >= map.size())
      throw Error(Errc::InconsistentInput, "match refers to cluster " + std::to_string(cluster) + " which does not exist");
    if (map[static_cast<std::size_t>(cluster)] != -1)
      throw Error(Errc::InconsistentInput, "cluster " + std::to_string(cluster) + " matched twice");
    map[static_cast<std::size_t>(cluster)] = label;
  };
  for (const auto& p : match.pairs) {
    claim(vis_map, p.visible, next);
    claim(ir_map, p.infrared, next);
    ++next;
  }
  for (auto& l : vis_map)
    if (l == -1) l = next++;
  for (auto& l : ir_map)
    if (l == -1) l = next++;

  UnifiedLabels out;
  out.n_labels = next;
  auto relabel = [](const ClusterAssignment& a, const std::vector<int>& map) {
    std::vector<int> labels(a.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = a.labels[i] == kNoise ? kNoise : map[static_cast<std::size_t>(a.labels[i])];
    return labels;
  };
  out.visible = relabel(visible, vis_map);
  out.infrared = relabel(infrared, ir_map);
  return out;
}

}  // namespace pclmp

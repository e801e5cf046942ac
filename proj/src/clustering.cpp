#include "pclmp/clustering.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <utility>

#include "pclmp/error.hpp"
#include "pclmp/kernels.hpp"

namespace pclmp {

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_clusters));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kNoise) out[static_cast<std::size_t>(labels[i])].push_back(i);
  return out;
}

ClusterAssignment dbscan(const Matrix& points, double eps, int min_pts) {
  if (!(eps > 0.0) || min_pts < 1) throw Error(Errc::InvalidParams, "dbscan needs eps > 0 and min_pts >= 1");
  const auto neighbors = kernels::parallel::region_query_all(points, eps);
  const auto min_size = static_cast<std::size_t>(min_pts);

  ClusterAssignment out;
  out.labels.assign(points.rows, kNoise);
  std::vector<char> visited(points.rows, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    if (visited[i] || neighbors[i].size() < min_size) continue;
    const int cluster = out.n_clusters++;
    std::deque<std::size_t> frontier{i};
    visited[i] = 1;
    out.labels[i] = cluster;
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop_front();
      if (neighbors[p].size() < min_size) continue;  // border point: do not expand
      for (std::size_t q : neighbors[p]) {
        if (out.labels[q] == kNoise) out.labels[q] = cluster;
        if (!visited[q]) {
          visited[q] = 1;
          frontier.push_back(q);
        }
      }
    }
  }
  return out;
}

namespace {

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

// Noise entries become fresh singleton labels.
std::vector<std::int64_t> expand_noise(std::span<const int> labels) {
  std::vector<std::int64_t> out(labels.size());
  std::int64_t next = -1;
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == kNoise ? next-- : labels[i];
  return out;
}

}  // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "ARI inputs differ in length");
  const auto n = static_cast<std::int64_t>(a.size());
  if (n < 2) return 1.0;
  const auto la = expand_noise(a);
  const auto lb = expand_noise(b);

  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> table;
  std::map<std::int64_t, std::int64_t> rows;
  std::map<std::int64_t, std::int64_t> cols;
  for (std::size_t i = 0; i < la.size(); ++i) {
    ++table[{la[i], lb[i]}];
    ++rows[la[i]];
    ++cols[lb[i]];
  }
  std::int64_t sum_ij = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, c] : table) sum_ij += choose2(c);
  for (const auto& [key, c] : rows) sum_a += choose2(c);
  for (const auto& [key, c] : cols) sum_b += choose2(c);

  const double total = static_cast<double>(choose2(n));
  const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) / total;
  const double max_index = 0.5 * static_cast<double>(sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (static_cast<double>(sum_ij) - expected) / denom;
}

}  // namespace pclmp

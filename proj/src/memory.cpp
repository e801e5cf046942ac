#include "pclmp/memory.hpp"

#include <algorithm>
#include <numeric>

#include "pclmp/error.hpp"
#include "pclmp/rng.hpp"

namespace pclmp {

CentroidMemory init_centroid_memory(const Matrix& embeddings, const ClusterAssignment& assignment) {
  if (assignment.labels.size() != embeddings.rows)
    throw Error(Errc::LengthMismatch, "assignment and embeddings differ in length");
  const auto clusters = assignment.members();
  CentroidMemory mem;
  mem.prototypes = Matrix(clusters.size(), embeddings.cols);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].empty()) throw Error(Errc::EmptyCluster, "cluster " + std::to_string(c) + " has no members");
    auto row = mem.prototypes.row(c);
    for (std::size_t i : clusters[c]) {
      const auto e = embeddings.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += e[j];
    }
    for (double& x : row) x /= static_cast<double>(clusters[c].size());
    l2_normalize_inplace(row);
  }
  return mem;
}

std::vector<std::size_t> farthest_members(const Matrix& embeddings, std::span<const std::size_t> members,
                                          std::span<const double> centroid, int k) {
  std::vector<double> dist(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) dist[i] = euclidean_dist(embeddings.row(members[i]), centroid);
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(std::max(k, 1))));
  for (auto& o : order) o = members[o];
  return order;
}

HardMemory select_hard_prototypes(const Matrix& embeddings, const ClusterAssignment& assignment,
                                  const CentroidMemory& centroids, int k) {
  if (k < 1) throw Error(Errc::InvalidParams, "hard prototype k must be >= 1");
  const auto clusters = assignment.members();
  if (clusters.size() != centroids.prototypes.rows)
    throw Error(Errc::InconsistentInput, "centroid memory does not match the assignment");
  HardMemory mem;
  mem.source_k = k;
  mem.prototypes = Matrix(clusters.size(), embeddings.cols);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].empty()) throw Error(Errc::EmptyCluster, "cluster " + std::to_string(c) + " has no members");
    const auto picked = farthest_members(embeddings, clusters[c], centroids.prototypes.row(c), k);
    if (picked.size() == 1) {
      mem.prototypes.set_row(c, embeddings.row(picked.front()));
      continue;
    }
    auto row = mem.prototypes.row(c);
    for (std::size_t i : picked) {
      const auto e = embeddings.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += e[j];
    }
    for (double& x : row) x /= static_cast<double>(picked.size());
    l2_normalize_inplace(row);
  }
  return mem;
}

Vec momentum_update(std::span<const double> prototype, std::span<const double> query, double alpha) {
  if (prototype.size() != query.size()) throw Error(Errc::DimMismatch, "prototype and query differ in dimension");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidParams, "momentum alpha must be in [0,1]");
  Vec out(prototype.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * prototype[i] + (1.0 - alpha) * query[i];
  l2_normalize_inplace(out);
  return out;
}

void momentum_update_row(Matrix& bank, std::size_t row, std::span<const double> query, double alpha) {
  bank.set_row(row, momentum_update(bank.row(row), query, alpha));
}

DynamicMemory rebuild_dynamic_memory(const Matrix& raw, const ClusterAssignment& assignment,
                                     const EncoderParams& momentum_encoder, int M, std::uint64_t seed) {
  if (M < 1) throw Error(Errc::InvalidParams, "dynamic memory size M must be >= 1");
  if (assignment.labels.size() != raw.rows) throw Error(Errc::LengthMismatch, "assignment and features differ in length");
  const auto clusters = assignment.members();
  const auto m = static_cast<std::size_t>(M);
  Rng rng = make_rng({seed, stream::kDynamicMemory});

  DynamicMemory dyn;
  dyn.sample_indices.resize(clusters.size());
  Matrix picked_raw(clusters.size() * m, raw.cols);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<std::size_t> pool = clusters[c];
    if (pool.empty()) throw Error(Errc::EmptyCluster, "cluster " + std::to_string(c) + " has no members");
    auto& chosen = dyn.sample_indices[c];
    if (pool.size() >= m) {
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
        chosen.push_back(pool[i]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t i = 0; i < m; ++i) chosen.push_back(pool[pick(rng)]);
    }
    for (std::size_t i = 0; i < m; ++i) picked_raw.set_row(c * m + i, raw.row(chosen[i]));
  }

  const Matrix features = forward_batch(momentum_encoder, picked_raw);
  dyn.members.reserve(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    Matrix f(m, features.cols);
    std::copy_n(features.data.begin() + static_cast<std::ptrdiff_t>(c * m * features.cols), m * features.cols,
                f.data.begin());
    dyn.members.push_back(std::move(f));
  }
  return dyn;
}

DynamicSelection select_dynamic_prototype(std::span<const double> query, int query_label, const DynamicMemory& dyn) {
  if (query_label < 0 || static_cast<std::size_t>(query_label) >= dyn.members.size())
    throw Error(Errc::InvalidLabel, "query label " + std::to_string(query_label) + " is not a cluster of this memory");
  DynamicSelection sel;
  sel.positive = static_cast<std::size_t>(query_label);
  sel.bank = Matrix(dyn.members.size(), query.size());
  sel.chosen.resize(dyn.members.size());
  std::vector<double> dist;
  for (std::size_t c = 0; c < dyn.members.size(); ++c) {
    const Matrix& f = dyn.members[c];
    dist.resize(f.rows);
    for (std::size_t i = 0; i < f.rows; ++i) dist[i] = euclidean_dist(query, f.row(i));
    const std::size_t pick = c == sel.positive ? argmax_idx(dist) : argmin_idx(dist);
    sel.chosen[c] = pick;
    sel.bank.set_row(c, f.row(pick));
  }
  return sel;
}

}  // namespace pclmp

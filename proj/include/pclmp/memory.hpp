#pragma once

// Per-modality prototype memories: cluster centroids, hard prototypes
// (members farthest from their centroid), and the dynamic memory of M
// momentum-encoder features per cluster.

#include <cstdint>
#include <span>
#include <vector>

#include "pclmp/clustering.hpp"
#include "pclmp/encoder.hpp"
#include "pclmp/numerics.hpp"

namespace pclmp {

struct CentroidMemory {
  Matrix prototypes;  // one unit-norm row per cluster
};

struct HardMemory {
  Matrix prototypes;
  int source_k = 1;
};

struct DynamicMemory {
  std::vector<Matrix> members;                       // per cluster, M x d
  std::vector<std::vector<std::size_t>> sample_indices;  // per cluster, the M sampled positions
};

CentroidMemory init_centroid_memory(const Matrix& embeddings, const ClusterAssignment& assignment);

// Positions of the k members farthest from the centroid, by descending
// distance with lowest position first on ties. k is clipped to the cluster size.
std::vector<std::size_t> farthest_members(const Matrix& embeddings, std::span<const std::size_t> members,
                                          std::span<const double> centroid, int k);

// k = 1 stores the farthest member itself; k > 1 stores the normalized mean
// of the k farthest.
HardMemory select_hard_prototypes(const Matrix& embeddings, const ClusterAssignment& assignment,
                                  const CentroidMemory& centroids, int k);

// l2_normalize(alpha * prototype + (1 - alpha) * query)
Vec momentum_update(std::span<const double> prototype, std::span<const double> query, double alpha);
void momentum_update_row(Matrix& bank, std::size_t row, std::span<const double> query, double alpha);

// `raw` holds the input features of one modality, row-aligned with
// `assignment.labels`. M positions are drawn per cluster (with replacement
// when the cluster is smaller than M) and encoded with the momentum encoder.
DynamicMemory rebuild_dynamic_memory(const Matrix& raw, const ClusterAssignment& assignment,
                                     const EncoderParams& momentum_encoder, int M, std::uint64_t seed);

struct DynamicSelection {
  Matrix bank;  // one row per cluster
  std::size_t positive = 0;
  std::vector<std::size_t> chosen;  // member index chosen in each cluster
};

// Own cluster: the member farthest from the query. Every other cluster: the
// member closest to the query.
DynamicSelection select_dynamic_prototype(std::span<const double> query, int query_label, const DynamicMemory& dyn);

}  // namespace pclmp

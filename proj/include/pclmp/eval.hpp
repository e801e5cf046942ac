#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pclmp/clustering.hpp"
#include "pclmp/matching.hpp"
#include "pclmp/numerics.hpp"

namespace pclmp {

// One query's ranked gallery: gallery indices by descending similarity
// (lowest index first on ties) and the relevance of each ranked position.
struct RankedList {
  std::vector<std::size_t> order;
  std::vector<char> relevant;

  bool has_relevant() const;
};

RankedList rank_gallery(std::span<const double> similarities, std::optional<int> query_id,
                        std::span<const std::optional<int>> gallery_ids);

// Cosine-similarity retrieval of every query against the gallery.
std::vector<RankedList> retrieve(const Matrix& queries, std::span<const std::optional<int>> query_ids,
                                 const Matrix& gallery, std::span<const std::optional<int>> gallery_ids);

// Queries with no relevant gallery item are skipped and counted.
struct CmcResult {
  std::vector<double> accuracy;  // per requested rank
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};
CmcResult cmc(std::span<const RankedList> results, std::span<const int> ranks);

struct MapResult {
  double map = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};
double average_precision(const RankedList& r);
MapResult mean_average_precision(std::span<const RankedList> results);

struct AriReport {
  double rgb = 0.0;
  double ir = 0.0;
  double all = 0.0;
};

// Records without a true id are left out of the comparison.
AriReport ari_report(const ClusterAssignment& visible, const ClusterAssignment& infrared, const UnifiedLabels& unified,
                     std::span<const std::optional<int>> true_visible, std::span<const std::optional<int>> true_infrared);

struct RetrievalMetrics {
  double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0, rank20 = 0.0;
  double map = 0.0;
  std::size_t skipped = 0;
};

// Infrared queries against the visible gallery and visible queries against
// the infrared gallery; the two directions are averaged.
RetrievalMetrics evaluate_cross_modal(const Matrix& visible, std::span<const std::optional<int>> visible_ids,
                                      const Matrix& infrared, std::span<const std::optional<int>> infrared_ids);

}  // namespace pclmp

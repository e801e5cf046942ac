#pragma once

// Cross-modality correspondence between visible and infrared clusters:
// maximum-total-cosine-similarity bipartite matching of centroid
// prototypes, used to produce unified labels across both modalities.

#include <span>
#include <vector>

#include "pclmp/clustering.hpp"
#include "pclmp/numerics.hpp"

namespace pclmp {

// Minimum-cost assignment of every row to a distinct column (rows <= cols).
// Returns the column chosen for each row.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

struct MatchPair {
  int visible = 0;
  int infrared = 0;
  double similarity = 0.0;
};

struct CrossModalMatch {
  std::vector<MatchPair> pairs;  // ascending by visible cluster
  std::vector<int> unmatched_visible;
  std::vector<int> unmatched_infrared;

  double total_similarity() const;
};

CrossModalMatch match_prototypes(const Matrix& visible_centroids, const Matrix& infrared_centroids);

struct UnifiedLabels {
  std::vector<int> visible;
  std::vector<int> infrared;
  int n_labels = 0;
};

// Matched pairs share label p (pair order); unmatched visible clusters and
// then unmatched infrared clusters get the following labels. Noise stays noise.
UnifiedLabels unify_labels(const ClusterAssignment& visible, const ClusterAssignment& infrared,
                           const CrossModalMatch& match);

}  // namespace pclmp

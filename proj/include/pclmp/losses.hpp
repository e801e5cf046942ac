#pragma once

// Prototype contrastive losses. Every loss here is the same InfoNCE kernel
// evaluated against a different prototype bank: cluster centroids (CPCL),
// hard prototypes (HPCL) or per-query dynamic prototypes (DPCL).
// Gradients flow to the queries only; banks are constants within a step.

#include <span>
#include <vector>

#include "pclmp/numerics.hpp"

namespace pclmp {

struct HyperParams {
  double tau = 0.05;
  double alpha = 0.1;   // memory momentum
  double beta = 0.999;  // momentum-encoder EMA
  double lambda = 0.5;  // HPCL weight after the switch; DPCL gets 1 - lambda
  int e_cpcl = 50;      // last epoch trained with centroid prototypes only
  int k = 1;            // hard samples per hard prototype
  int M = 16;           // dynamic memory members per cluster
  double eps = 0.6;     // DBSCAN radius on the unit sphere
  int min_pts = 4;
  int P = 16;
  int K = 16;
  double lr = 3.5e-4;
  int lr_decay_every = 20;
  double lr_decay_factor = 0.1;

  // Throws InvalidConfig naming the first offending field.
  void validate() const;
};

struct InfoNceResult {
  double loss = 0.0;
  Vec grad;  // d loss / d query
};

// loss = -log softmax(bank q / tau)[pos],
// grad = (sum_i p_i bank_i - bank_pos) / tau.
InfoNceResult info_nce(std::span<const double> query, const Matrix& bank, std::size_t pos, double tau);

// One modality's queries with the bank and positive index each one is
// scored against.
struct QueryTerms {
  const Matrix* queries = nullptr;  // null for a modality with no queries
  std::vector<const Matrix*> banks;
  std::vector<std::size_t> positives;

  std::size_t size() const { return positives.size(); }
  static QueryTerms shared_bank(const Matrix& queries, const Matrix& bank, std::span<const int> labels);
};

struct LossOutput {
  double value = 0.0;
  Matrix grad_v;  // one row per visible query
  Matrix grad_r;  // one row per infrared query
};

// Mean InfoNCE over visible queries plus mean over infrared queries.
LossOutput bimodal_loss(const QueryTerms& visible, const QueryTerms& infrared, double tau);

// sum_i w_i * loss_i, values and gradients alike.
LossOutput weighted_sum(std::span<const std::pair<double, const LossOutput*>> terms);

enum class LossPhase { Centroid, HardDynamic };

// Centroid for epoch <= e_cpcl, HardDynamic afterwards.
LossPhase phase_for_epoch(int epoch, int e_cpcl);

// Progressive combination: the CPCL output verbatim while epoch <= e_cpcl,
// lambda * HPCL + (1 - lambda) * DPCL afterwards. Only the components of the
// active branch are read and may be null otherwise.
LossOutput pclmp_loss(int epoch, const HyperParams& hp, const LossOutput* cpcl, const LossOutput* hpcl,
                      const LossOutput* dpcl);

}  // namespace pclmp

#pragma once

// The training loop: per epoch, cluster phi_0 embeddings per modality,
// rebuild the centroid / hard / dynamic memories, then iterate P x K batches
// with the progressive loss, Adam on phi_0, EMA into phi_m, and momentum
// updates of the positive centroid and hard prototypes.
//
// The trainer never sees ground-truth identities: it copies only features
// and modalities out of the dataset. Evaluation takes the dataset separately.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pclmp/clustering.hpp"
#include "pclmp/data.hpp"
#include "pclmp/encoder.hpp"
#include "pclmp/losses.hpp"
#include "pclmp/matching.hpp"
#include "pclmp/memory.hpp"

namespace pclmp {

struct Ablation {
  bool enable_hpcl = true;
  bool enable_dpcl = true;
  // Off: the hard-phase terms are added to CPCL from the first epoch.
  bool enable_pcl_schedule = true;
  // Adds a pull toward the matched other-modality centroid.
  bool enable_crossmodal_loss = false;
  // Keep minimizing CPCL after the switch instead of replacing it.
  bool keep_cpcl_after_switch = false;
};

struct TrainConfig {
  HyperParams hp;
  Ablation ablation;
  std::vector<std::size_t> hidden_dims{128};
  std::size_t embed_dim = 64;
  int epochs = 100;
  std::uint64_t seed = 0;
  double crossmodal_weight = 0.5;

  void validate() const;
};

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

struct EpochReport {
  int epoch = 0;
  double loss_cpcl = kNotComputed;
  double loss_hpcl = kNotComputed;
  double loss_dpcl = kNotComputed;
  double loss_total = kNotComputed;
  double ari_rgb = kNotComputed;
  double ari_ir = kNotComputed;
  double ari_all = kNotComputed;
  double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0, rank20 = 0.0;
  double map = 0.0;
  int n_clusters_v = 0;
  int n_clusters_r = 0;
};

struct ModalityMemory {
  ClusterAssignment assignment;
  CentroidMemory centroid;
  HardMemory hard;
  DynamicMemory dynamic;
};

struct TrainState {
  int epoch = 0;
  std::uint64_t step = 0;
  EncoderParams online;
  EncoderParams momentum;
  AdamState adam;
  ModalityMemory visible;
  ModalityMemory infrared;
  std::optional<CrossModalMatch> match;
};

// What one optimizer step saw; handed to observers after the step.
struct StepTrace {
  int epoch = 0;
  std::uint64_t step = 0;
  bool cpcl = false, hpcl = false, dpcl = false, crossmodal = false;
  Matrix queries_v, queries_r;  // phi_0 embeddings before the update
  std::vector<int> labels_v, labels_r;
  std::vector<DynamicSelection> dynamic_v, dynamic_r;  // empty unless DPCL ran
  LossOutput total;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  // After clustering and memory construction; embeddings are phi_0 outputs
  // row-aligned with the modality's assignment.
  virtual void on_memories_built(const TrainState&, const Matrix& /*emb_v*/, const Matrix& /*emb_r*/) {}
  virtual void on_step(const TrainState&, const StepTrace&) {}
};

struct EpochLosses {
  double cpcl = kNotComputed;
  double hpcl = kNotComputed;
  double dpcl = kNotComputed;
  double total = kNotComputed;
  std::uint64_t steps = 0;
};

class Trainer {
 public:
  Trainer(const Dataset& data, TrainConfig cfg);

  const TrainConfig& config() const { return cfg_; }
  const TrainState& state() const { return state_; }
  void set_observer(TrainObserver* obs) { observer_ = obs; }

  // Cluster and build memories for `epoch` without training (epoch 0
  // evaluation uses this).
  void prepare_epoch(int epoch);
  // Trains epoch state().epoch + 1.
  EpochLosses run_epoch();
  // Matches the current centroid memories across modalities.
  void refresh_match();

  Matrix embed(Modality m, bool use_momentum) const;

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  struct Batch;
  Batch make_batch(Modality m, const ModalityMemory& mem, std::uint64_t stream_tag) const;
  void train_step(int epoch, EpochLosses& acc);

  TrainConfig cfg_;
  Matrix raw_v_;
  Matrix raw_r_;
  TrainState state_;
  TrainObserver* observer_ = nullptr;
};

// Evaluates the trainer's current state: retrieval with phi_m embeddings,
// ARI of the current pseudo-labels against `data`'s identities.
EpochReport evaluate(const Trainer& trainer, const Dataset& data, int epoch, const EpochLosses& losses);

// Full run: epoch-0 evaluation (fresh runs only), then epochs up to
// cfg.epochs. `on_epoch` is called after every report.
std::vector<EpochReport> train(Trainer& trainer, const Dataset& data,
                               const std::function<void(const EpochReport&)>& on_epoch = {});

const std::vector<std::string>& metrics_columns();
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpochReport& r);
std::string report_to_json(const EpochReport& r);

}  // namespace pclmp

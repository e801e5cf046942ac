#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pclmp/numerics.hpp"

namespace pclmp {

enum class Modality : std::uint8_t { Visible = 0, Infrared = 1 };

inline constexpr int kNoise = -1;

struct FeatureRecord {
  Vec raw;
  Modality modality = Modality::Visible;
  // Ground truth; read by evaluation only.
  std::optional<int> true_id;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<FeatureRecord> records;

  std::vector<std::size_t> indices_of(Modality m) const;
  // Drops every true_id, leaving features and modalities untouched.
  Dataset without_ground_truth() const;
};

struct SynthConfig {
  int n_identities = 50;
  int d_in = 32;
  int samples_per_id_per_modality = 16;
  double intra_id_spread = 0.05;
  double modality_shift = 0.5;
  double noise_fraction = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
};

// Records are laid out identity-major: for each identity, its visible
// samples followed by its infrared samples.
Dataset generate_synthetic(const SynthConfig& cfg);

enum class FeatureFormat { Csv, XpclBinary };

Dataset load_features(const std::filesystem::path& path, FeatureFormat format);
void save_features(const Dataset& data, const std::filesystem::path& path, FeatureFormat format);
// Picks the format from the extension (.csv, otherwise binary).
FeatureFormat format_for(const std::filesystem::path& path);

struct BatchSpec {
  int P = 16;
  int K = 16;
};

// Identity-balanced sampling over one modality's pseudo-labels. Returns
// P*K positions into `labels`, grouped by chosen cluster. Deterministic in
// (seed, epoch, step, stream).
std::vector<std::size_t> pk_sample(std::span<const int> labels, BatchSpec spec, std::uint64_t seed, int epoch,
                                   std::uint64_t step, std::uint64_t stream = 0);

}  // namespace pclmp

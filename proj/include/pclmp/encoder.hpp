#pragma once

// Small MLP encoder standing in for the image backbone. Layers are affine
// maps with tanh between them; the last layer's output is L2-normalized.
// All parameters live in one flat buffer so that Adam and the EMA update
// are plain elementwise loops.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pclmp/numerics.hpp"

namespace pclmp {

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  bool operator==(const LayerShape&) const = default;
};

class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(std::vector<LayerShape> shapes);

  // Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static EncoderParams random(std::span<const std::size_t> dims, std::uint64_t seed);
  // One d x d layer with W = I, b = 0.
  static EncoderParams identity(std::size_t d);

  const std::vector<LayerShape>& shapes() const { return shapes_; }
  std::size_t n_layers() const { return shapes_.size(); }
  std::size_t input_dim() const { return shapes_.front().in; }
  std::size_t output_dim() const { return shapes_.back().out; }

  // Weight of layer l as an out x in matrix view (copy).
  Matrix weight(std::size_t l) const;
  std::span<double> weight_span(std::size_t l);
  std::span<const double> weight_span(std::size_t l) const;
  std::span<double> bias(std::size_t l);
  std::span<const double> bias(std::size_t l) const;

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::size_t size() const { return data_.size(); }

  // Same shapes, all zeros.
  EncoderParams zeros_like() const { return EncoderParams(shapes_); }
  bool same_shape(const EncoderParams& other) const { return shapes_ == other.shapes_; }
  bool operator==(const EncoderParams&) const = default;

 private:
  std::vector<LayerShape> shapes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> data_;
};

// Intermediates kept by forward_batch for the backward pass.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input to each layer (post-activation)
  std::vector<Matrix> pre;           // affine output of each layer
  std::vector<double> out_norms;     // ||y|| before normalization
  Matrix embeddings;
};

Vec forward(const EncoderParams& params, std::span<const double> x);
Matrix forward_batch(const EncoderParams& params, const Matrix& x, ForwardCache* cache = nullptr);

// Gradient of sum_s grad_embedding(s) . embedding(s) with respect to every
// parameter, using the normalization Jacobian (I - y^ y^T)/||y||.
EncoderParams backward_batch(const EncoderParams& params, const ForwardCache& cache, const Matrix& grad_embedding);
EncoderParams backward(const EncoderParams& params, std::span<const double> x, std::span<const double> grad_embedding);

// phi_m <- beta * phi_m + (1 - beta) * phi_0
void ema_update(EncoderParams& momentum, const EncoderParams& online, double beta);

struct AdamConfig {
  double lr = 3.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int decay_every = 20;
  double decay_factor = 0.1;
};

// lr * decay_factor^floor(epoch / decay_every)
double learning_rate(const AdamConfig& cfg, int epoch);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static AdamState for_params(const EncoderParams& p) { return {std::vector<double>(p.size()), std::vector<double>(p.size()), 0}; }
  bool operator==(const AdamState&) const = default;
};

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state, const AdamConfig& cfg, double lr);

// Checkpoint: "XPCK", u32 version, u32 epoch, u64 step, u32 layer count,
// per layer u32 in + u32 out, then phi_0, phi_m, Adam m, Adam v as f32,
// all little-endian.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  int epoch = 0;
  std::uint64_t step = 0;
  EncoderParams online;
  EncoderParams momentum;
  AdamState adam;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pclmp

#include "pclmp/encoder.hpp"

#include <cmath>
#include <fstream>

#include "pclmp/binio.hpp"
#include "pclmp/error.hpp"
#include "pclmp/kernels.hpp"
#include "pclmp/rng.hpp"

namespace pclmp {

EncoderParams::EncoderParams(std::vector<LayerShape> shapes) : shapes_(std::move(shapes)) {
  if (shapes_.empty()) throw Error(Errc::ShapeMismatch, "encoder needs at least one layer");
  std::size_t off = 0;
  for (std::size_t l = 0; l < shapes_.size(); ++l) {
    const auto& s = shapes_[l];
    if (s.in == 0 || s.out == 0) throw Error(Errc::ShapeMismatch, "layer dimensions must be positive");
    if (l > 0 && shapes_[l - 1].out != s.in) throw Error(Errc::ShapeMismatch, "consecutive layers do not chain");
    offsets_.push_back(off);
    off += s.out * s.in + s.out;
  }
  data_.assign(off, 0.0);
}

EncoderParams EncoderParams::random(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw Error(Errc::ShapeMismatch, "encoder needs input and output dimensions");
  std::vector<LayerShape> shapes;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) shapes.push_back({dims[i], dims[i + 1]});
  EncoderParams p(std::move(shapes));
  Rng rng = make_rng({seed, stream::kEncoderInit});
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.shapes_[l].in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : p.weight_span(l)) w = u(rng);
  }
  return p;
}

EncoderParams EncoderParams::identity(std::size_t d) {
  EncoderParams p({{d, d}});
  auto w = p.weight_span(0);
  for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
  return p;
}

Matrix EncoderParams::weight(std::size_t l) const {
  Matrix m(shapes_[l].out, shapes_[l].in);
  const auto w = weight_span(l);
  std::copy(w.begin(), w.end(), m.data.begin());
  return m;
}

std::span<double> EncoderParams::weight_span(std::size_t l) {
  return {data_.data() + offsets_[l], shapes_[l].out * shapes_[l].in};
}
std::span<const double> EncoderParams::weight_span(std::size_t l) const {
  return {data_.data() + offsets_[l], shapes_[l].out * shapes_[l].in};
}
std::span<double> EncoderParams::bias(std::size_t l) {
  return {data_.data() + offsets_[l] + shapes_[l].out * shapes_[l].in, shapes_[l].out};
}
std::span<const double> EncoderParams::bias(std::size_t l) const {
  return {data_.data() + offsets_[l] + shapes_[l].out * shapes_[l].in, shapes_[l].out};
}

Matrix forward_batch(const EncoderParams& params, const Matrix& x, ForwardCache* cache) {
  if (x.cols != params.input_dim()) throw Error(Errc::DimMismatch, "input dimension does not match encoder");
  Matrix act = x;
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    Matrix pre = kernels::parallel::affine_forward(act, params.weight(l), params.bias(l));
    if (cache) cache->layer_inputs.push_back(act);
    const bool last = l + 1 == params.n_layers();
    if (last) {
      act = pre;
    } else {
      act = pre;
      for (double& v : act.data) v = std::tanh(v);
    }
    if (cache) cache->pre.push_back(std::move(pre));
  }
  std::vector<double> norms(act.rows);
  for (std::size_t s = 0; s < act.rows; ++s) {
    norms[s] = l2_norm(act.row(s));
    l2_normalize_inplace(act.row(s));
  }
  if (cache) {
    cache->out_norms = std::move(norms);
    cache->embeddings = act;
  }
  return act;
}

Vec forward(const EncoderParams& params, std::span<const double> x) {
  Matrix m(1, x.size());
  m.set_row(0, x);
  return forward_batch(params, m).row_vec(0);
}

EncoderParams backward_batch(const EncoderParams& params, const ForwardCache& cache, const Matrix& grad_embedding) {
  const std::size_t n = cache.embeddings.rows;
  if (grad_embedding.rows != n || grad_embedding.cols != params.output_dim())
    throw Error(Errc::DimMismatch, "embedding gradient shape does not match forward pass");
  EncoderParams grads = params.zeros_like();

  // Through the normalization: g_y = (g - y^ (y^ . g)) / ||y||
  Matrix delta(n, params.output_dim());
  for (std::size_t s = 0; s < n; ++s) {
    const auto yhat = cache.embeddings.row(s);
    const auto g = grad_embedding.row(s);
    const double proj = dot(yhat, g);
    for (std::size_t j = 0; j < delta.cols; ++j) delta(s, j) = (g[j] - yhat[j] * proj) / cache.out_norms[s];
  }

  for (std::size_t l = params.n_layers(); l-- > 0;) {
    const auto& shape = params.shapes()[l];
    Matrix gw(shape.out, shape.in);
    auto gb = grads.bias(l);
    kernels::parallel::affine_param_grad(delta, cache.layer_inputs[l], gw, gb);
    std::copy(gw.data.begin(), gw.data.end(), grads.weight_span(l).begin());
    if (l == 0) break;
    Matrix gin = kernels::parallel::affine_input_grad(delta, params.weight(l));
    // layer l's input is tanh(pre[l-1])
    const Matrix& act = cache.layer_inputs[l];
    for (std::size_t i = 0; i < gin.data.size(); ++i) gin.data[i] *= 1.0 - act.data[i] * act.data[i];
    delta = std::move(gin);
  }
  return grads;
}

EncoderParams backward(const EncoderParams& params, std::span<const double> x, std::span<const double> grad_embedding) {
  Matrix xm(1, x.size());
  xm.set_row(0, x);
  ForwardCache cache;
  forward_batch(params, xm, &cache);
  Matrix g(1, grad_embedding.size());
  g.set_row(0, grad_embedding);
  return backward_batch(params, cache, g);
}

void ema_update(EncoderParams& momentum, const EncoderParams& online, double beta) {
  if (!momentum.same_shape(online)) throw Error(Errc::ShapeMismatch, "EMA between encoders of different shape");
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(Errc::InvalidParams, "EMA coefficient must be in [0,1]");
  auto m = momentum.flat();
  const auto o = online.flat();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = beta * m[i] + (1.0 - beta) * o[i];
}

double learning_rate(const AdamConfig& cfg, int epoch) {
  if (cfg.decay_every <= 0) return cfg.lr;
  return cfg.lr * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state, const AdamConfig& cfg, double lr) {
  if (!params.same_shape(grads) || state.m.size() != params.size() || state.v.size() != params.size())
    throw Error(Errc::ShapeMismatch, "optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto p = params.flat();
  const auto g = grads.flat();
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

namespace {

constexpr char kCkptMagic[4] = {'X', 'P', 'C', 'K'};

void put_values(std::ostream& os, std::span<const double> v) {
  for (double x : v) binio::put_f32(os, x);
}

void get_values(std::istream& is, std::span<double> v, const char* what) {
  for (double& x : v) x = binio::get_f32(is, what);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (!ckpt.online.same_shape(ckpt.momentum) || ckpt.adam.m.size() != ckpt.online.size())
    throw Error(Errc::ShapeMismatch, "checkpoint parts disagree in shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kCkptMagic, 4);
  binio::put_le(out, Checkpoint::kVersion);
  binio::put_le(out, static_cast<std::uint32_t>(ckpt.epoch));
  binio::put_le(out, ckpt.step);
  binio::put_le(out, static_cast<std::uint32_t>(ckpt.online.n_layers()));
  for (const auto& s : ckpt.online.shapes()) {
    binio::put_le(out, static_cast<std::uint32_t>(s.in));
    binio::put_le(out, static_cast<std::uint32_t>(s.out));
  }
  put_values(out, ckpt.online.flat());
  put_values(out, ckpt.momentum.flat());
  put_values(out, ckpt.adam.m);
  put_values(out, ckpt.adam.v);
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  char magic[4] = {};
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kCkptMagic))
    throw Error(Errc::ParseError, "offset 0: bad magic, expected XPCK");
  const auto version = binio::get_le<std::uint32_t>(in, "version");
  if (version != Checkpoint::kVersion)
    throw Error(Errc::ParseError, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.epoch = static_cast<int>(binio::get_le<std::uint32_t>(in, "epoch"));
  ckpt.step = binio::get_le<std::uint64_t>(in, "step");
  const auto n_layers = binio::get_le<std::uint32_t>(in, "layer count");
  if (n_layers == 0 || n_layers > 64) throw Error(Errc::ParseError, "implausible layer count");
  std::vector<LayerShape> shapes;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerShape s;
    s.in = binio::get_le<std::uint32_t>(in, "layer input");
    s.out = binio::get_le<std::uint32_t>(in, "layer output");
    shapes.push_back(s);
  }
  ckpt.online = EncoderParams(shapes);
  ckpt.momentum = EncoderParams(shapes);
  ckpt.adam = AdamState::for_params(ckpt.online);
  ckpt.adam.step = ckpt.step;
  get_values(in, ckpt.online.flat(), "online parameters");
  get_values(in, ckpt.momentum.flat(), "momentum parameters");
  get_values(in, ckpt.adam.m, "first moments");
  get_values(in, ckpt.adam.v, "second moments");
  if (in.peek() != std::char_traits<char>::eof()) throw Error(Errc::ParseError, "trailing bytes in checkpoint");
  return ckpt;
}

}  // namespace pclmp

#include "pclmp/trainer.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "pclmp/error.hpp"
#include "pclmp/eval.hpp"

namespace pclmp {

namespace {

Matrix gather_raw(const Dataset& data, Modality m) {
  const auto idx = data.indices_of(m);
  Matrix out(idx.size(), data.dim);
  for (std::size_t i = 0; i < idx.size(); ++i) out.set_row(i, data.records[idx[i]].raw);
  return out;
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) out.set_row(i, src.row(rows[i]));
  return out;
}

std::size_t usable(const ClusterAssignment& a) {
  return static_cast<std::size_t>(std::count_if(a.labels.begin(), a.labels.end(), [](int l) { return l != kNoise; }));
}

void running_mean(double& acc, double value, std::uint64_t n) {
  acc = n == 1 ? value : acc + (value - acc) / static_cast<double>(n);
}

// Each query of one modality against the matched centroid of the other
// modality. Unmatched queries contribute nothing.
LossOutput crossmodal_term(const Matrix& qv, std::span<const int> lv, const Matrix& qr, std::span<const int> lr,
                           const Matrix& cent_v, const Matrix& cent_r, const CrossModalMatch& match, double tau) {
  std::vector<int> v_to_r(cent_v.rows, -1), r_to_v(cent_r.rows, -1);
  for (const auto& p : match.pairs) {
    v_to_r[static_cast<std::size_t>(p.visible)] = p.infrared;
    r_to_v[static_cast<std::size_t>(p.infrared)] = p.visible;
  }
  auto side = [&](const Matrix& q, std::span<const int> labels, const std::vector<int>& partner, const Matrix& bank,
                  Matrix& grad) {
    std::vector<std::size_t> rows;
    std::vector<int> targets;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int t = partner[static_cast<std::size_t>(labels[i])];
      if (t < 0) continue;
      rows.push_back(i);
      targets.push_back(t);
    }
    grad = Matrix(q.rows, q.cols);
    if (rows.empty()) return 0.0;
    const Matrix sub = gather_rows(q, rows);
    const auto terms = QueryTerms::shared_bank(sub, bank, targets);
    const LossOutput part = bimodal_loss(terms, QueryTerms{}, tau);
    for (std::size_t i = 0; i < rows.size(); ++i) grad.set_row(rows[i], part.grad_v.row(i));
    return part.value;
  };
  LossOutput out;
  out.value = side(qv, lv, v_to_r, cent_r, out.grad_v) + side(qr, lr, r_to_v, cent_v, out.grad_r);
  return out;
}

std::vector<DynamicSelection> select_all(const Matrix& queries, std::span<const int> labels, const DynamicMemory& dyn) {
  std::vector<DynamicSelection> out(queries.rows);
  const auto n = static_cast<std::ptrdiff_t>(queries.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto q = static_cast<std::size_t>(i);
    out[q] = select_dynamic_prototype(queries.row(q), labels[q], dyn);
  }
  return out;
}

QueryTerms dynamic_terms(const Matrix& queries, const std::vector<DynamicSelection>& sel) {
  QueryTerms t;
  t.queries = &queries;
  for (const auto& s : sel) {
    t.banks.push_back(&s.bank);
    t.positives.push_back(s.positive);
  }
  return t;
}

}  // namespace

void TrainConfig::validate() const {
  hp.validate();
  if (epochs < 0) throw Error(Errc::InvalidConfig, "epochs must be >= 0");
  if (embed_dim < 1) throw Error(Errc::InvalidConfig, "embed_dim must be >= 1");
  for (auto h : hidden_dims)
    if (h < 1) throw Error(Errc::InvalidConfig, "hidden_dims entries must be >= 1");
  if (!(crossmodal_weight >= 0.0)) throw Error(Errc::InvalidConfig, "crossmodal_weight must be >= 0");
}

struct Trainer::Batch {
  std::vector<std::size_t> rows;  // positions within the modality
  std::vector<int> labels;
  Matrix raw;
};

Trainer::Trainer(const Dataset& data, TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (data.dim == 0) throw Error(Errc::InvalidConfig, "dataset has no feature dimension");
  raw_v_ = gather_raw(data, Modality::Visible);
  raw_r_ = gather_raw(data, Modality::Infrared);
  if (raw_v_.rows == 0 || raw_r_.rows == 0) throw Error(Errc::InvalidConfig, "dataset needs records of both modalities");
  std::vector<std::size_t> dims{data.dim};
  dims.insert(dims.end(), cfg_.hidden_dims.begin(), cfg_.hidden_dims.end());
  dims.push_back(cfg_.embed_dim);
  state_.online = EncoderParams::random(dims, cfg_.seed);
  state_.momentum = state_.online;
  state_.adam = AdamState::for_params(state_.online);
}

Matrix Trainer::embed(Modality m, bool use_momentum) const {
  const EncoderParams& p = use_momentum ? state_.momentum : state_.online;
  return forward_batch(p, m == Modality::Visible ? raw_v_ : raw_r_);
}

void Trainer::prepare_epoch(int epoch) {
  const auto& hp = cfg_.hp;
  const Matrix emb_v = embed(Modality::Visible, false);
  const Matrix emb_r = embed(Modality::Infrared, false);
  auto build = [&](const Matrix& emb, const Matrix& raw, ModalityMemory& mem, std::uint64_t tag) {
    mem.assignment = dbscan(emb, hp.eps, hp.min_pts);
    if (mem.assignment.n_clusters == 0)
      throw Error(Errc::InsufficientClusters, "DBSCAN found no clusters at eps=" + std::to_string(hp.eps));
    mem.centroid = init_centroid_memory(emb, mem.assignment);
    mem.hard = select_hard_prototypes(emb, mem.assignment, mem.centroid, hp.k);
    const std::uint64_t dyn_seed = cfg_.seed ^ (static_cast<std::uint64_t>(epoch) << 20) ^ (tag << 40);
    mem.dynamic = rebuild_dynamic_memory(raw, mem.assignment, state_.momentum, hp.M, dyn_seed);
  };
  build(emb_v, raw_v_, state_.visible, 1);
  build(emb_r, raw_r_, state_.infrared, 2);
  state_.match.reset();
  if (cfg_.ablation.enable_crossmodal_loss) refresh_match();
  if (observer_) observer_->on_memories_built(state_, emb_v, emb_r);
}

void Trainer::refresh_match() {
  state_.match = match_prototypes(state_.visible.centroid.prototypes, state_.infrared.centroid.prototypes);
}

Trainer::Batch Trainer::make_batch(Modality m, const ModalityMemory& mem, std::uint64_t stream_tag) const {
  Batch b;
  b.rows = pk_sample(mem.assignment.labels, {cfg_.hp.P, cfg_.hp.K}, cfg_.seed, state_.epoch, state_.step, stream_tag);
  for (std::size_t r : b.rows) b.labels.push_back(mem.assignment.labels[r]);
  b.raw = gather_rows(m == Modality::Visible ? raw_v_ : raw_r_, b.rows);
  return b;
}

EpochLosses Trainer::run_epoch() {
  const int epoch = state_.epoch + 1;
  state_.epoch = epoch;
  prepare_epoch(epoch);
  const std::size_t per_batch = static_cast<std::size_t>(cfg_.hp.P) * static_cast<std::size_t>(cfg_.hp.K);
  const std::size_t n = std::max(usable(state_.visible.assignment), usable(state_.infrared.assignment));
  const std::size_t steps = std::max<std::size_t>(1, (n + per_batch - 1) / per_batch);
  EpochLosses acc;
  for (std::size_t s = 0; s < steps; ++s) train_step(epoch, acc);
  refresh_match();
  return acc;
}

void Trainer::train_step(int epoch, EpochLosses& acc) {
  const auto& hp = cfg_.hp;
  const auto& ab = cfg_.ablation;
  Batch bv = make_batch(Modality::Visible, state_.visible, 0);
  Batch br = make_batch(Modality::Infrared, state_.infrared, 1);

  ForwardCache cache_v, cache_r;
  forward_batch(state_.online, bv.raw, &cache_v);
  forward_batch(state_.online, br.raw, &cache_r);
  const Matrix& qv = cache_v.embeddings;
  const Matrix& qr = cache_r.embeddings;

  StepTrace trace;
  trace.epoch = epoch;
  const bool hard_phase = !ab.enable_pcl_schedule || phase_for_epoch(epoch, hp.e_cpcl) == LossPhase::HardDynamic;
  trace.hpcl = hard_phase && ab.enable_hpcl;
  trace.dpcl = hard_phase && ab.enable_dpcl;
  trace.cpcl = !hard_phase || !ab.enable_pcl_schedule || ab.keep_cpcl_after_switch || !(trace.hpcl || trace.dpcl);
  trace.crossmodal = ab.enable_crossmodal_loss && state_.match.has_value();

  LossOutput cpcl, hpcl, dpcl, cross;
  if (trace.cpcl)
    cpcl = bimodal_loss(QueryTerms::shared_bank(qv, state_.visible.centroid.prototypes, bv.labels),
                        QueryTerms::shared_bank(qr, state_.infrared.centroid.prototypes, br.labels), hp.tau);
  if (trace.hpcl)
    hpcl = bimodal_loss(QueryTerms::shared_bank(qv, state_.visible.hard.prototypes, bv.labels),
                        QueryTerms::shared_bank(qr, state_.infrared.hard.prototypes, br.labels), hp.tau);
  if (trace.dpcl) {
    trace.dynamic_v = select_all(qv, bv.labels, state_.visible.dynamic);
    trace.dynamic_r = select_all(qr, br.labels, state_.infrared.dynamic);
    dpcl = bimodal_loss(dynamic_terms(qv, trace.dynamic_v), dynamic_terms(qr, trace.dynamic_r), hp.tau);
  }
  if (trace.crossmodal)
    cross = crossmodal_term(qv, bv.labels, qr, br.labels, state_.visible.centroid.prototypes,
                            state_.infrared.centroid.prototypes, *state_.match, hp.tau);

  const bool standard = ab.enable_pcl_schedule && ab.enable_hpcl && ab.enable_dpcl && !ab.keep_cpcl_after_switch &&
                        !trace.crossmodal;
  if (standard) {
    trace.total = pclmp_loss(epoch, hp, trace.cpcl ? &cpcl : nullptr, trace.hpcl ? &hpcl : nullptr,
                             trace.dpcl ? &dpcl : nullptr);
  } else {
    std::vector<std::pair<double, const LossOutput*>> terms;
    if (trace.cpcl) terms.emplace_back(1.0, &cpcl);
    const bool both = trace.hpcl && trace.dpcl;
    if (trace.hpcl) terms.emplace_back(both ? hp.lambda : 1.0, &hpcl);
    if (trace.dpcl) terms.emplace_back(both ? 1.0 - hp.lambda : 1.0, &dpcl);
    if (trace.crossmodal) terms.emplace_back(cfg_.crossmodal_weight, &cross);
    trace.total = weighted_sum(terms);
  }

  EncoderParams grads = backward_batch(state_.online, cache_v, trace.total.grad_v);
  const EncoderParams grads_r = backward_batch(state_.online, cache_r, trace.total.grad_r);
  auto g = grads.flat();
  const auto gr = grads_r.flat();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += gr[i];

  AdamConfig adam;
  adam.lr = hp.lr;
  adam.decay_every = hp.lr_decay_every;
  adam.decay_factor = hp.lr_decay_factor;
  adam_step(state_.online, grads, state_.adam, adam, learning_rate(adam, epoch));
  ++state_.step;
  ema_update(state_.momentum, state_.online, hp.beta);

  for (std::size_t i = 0; i < qv.rows; ++i) {
    const auto c = static_cast<std::size_t>(bv.labels[i]);
    momentum_update_row(state_.visible.centroid.prototypes, c, qv.row(i), hp.alpha);
    momentum_update_row(state_.visible.hard.prototypes, c, qv.row(i), hp.alpha);
  }
  for (std::size_t i = 0; i < qr.rows; ++i) {
    const auto c = static_cast<std::size_t>(br.labels[i]);
    momentum_update_row(state_.infrared.centroid.prototypes, c, qr.row(i), hp.alpha);
    momentum_update_row(state_.infrared.hard.prototypes, c, qr.row(i), hp.alpha);
  }

  ++acc.steps;
  if (trace.cpcl) running_mean(acc.cpcl, cpcl.value, acc.steps);
  if (trace.hpcl) running_mean(acc.hpcl, hpcl.value, acc.steps);
  if (trace.dpcl) running_mean(acc.dpcl, dpcl.value, acc.steps);
  running_mean(acc.total, trace.total.value, acc.steps);

  if (observer_) {
    trace.step = state_.step;
    trace.queries_v = qv;
    trace.queries_r = qr;
    trace.labels_v = std::move(bv.labels);
    trace.labels_r = std::move(br.labels);
    observer_->on_step(state_, trace);
  }
}

Checkpoint Trainer::checkpoint() const {
  return {state_.epoch, state_.step, state_.online, state_.momentum, state_.adam};
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (!ckpt.online.same_shape(state_.online) || !ckpt.momentum.same_shape(state_.online))
    throw Error(Errc::ShapeMismatch, "checkpoint encoder does not match the configured architecture");
  state_.epoch = ckpt.epoch;
  state_.step = ckpt.step;
  state_.online = ckpt.online;
  state_.momentum = ckpt.momentum;
  state_.adam = ckpt.adam;
  state_.adam.step = ckpt.step;
}

EpochReport evaluate(const Trainer& trainer, const Dataset& data, int epoch, const EpochLosses& losses) {
  EpochReport r;
  r.epoch = epoch;
  r.loss_cpcl = losses.cpcl;
  r.loss_hpcl = losses.hpcl;
  r.loss_dpcl = losses.dpcl;
  r.loss_total = losses.total;
  const auto& st = trainer.state();
  r.n_clusters_v = st.visible.assignment.n_clusters;
  r.n_clusters_r = st.infrared.assignment.n_clusters;

  std::vector<std::optional<int>> ids_v, ids_r;
  for (std::size_t i : data.indices_of(Modality::Visible)) ids_v.push_back(data.records[i].true_id);
  for (std::size_t i : data.indices_of(Modality::Infrared)) ids_r.push_back(data.records[i].true_id);
  const bool known = std::any_of(ids_v.begin(), ids_v.end(), [](const auto& x) { return x.has_value(); }) &&
                     std::any_of(ids_r.begin(), ids_r.end(), [](const auto& x) { return x.has_value(); });
  if (!known) return r;

  const Matrix emb_v = trainer.embed(Modality::Visible, true);
  const Matrix emb_r = trainer.embed(Modality::Infrared, true);
  try {
    const auto m = evaluate_cross_modal(emb_v, ids_v, emb_r, ids_r);
    r.rank1 = m.rank1;
    r.rank5 = m.rank5;
    r.rank10 = m.rank10;
    r.rank20 = m.rank20;
    r.map = m.map;
  } catch (const Error& e) {
    if (e.code() != Errc::NoRelevantItem) throw;
  }
  if (st.match) {
    const auto unified = unify_labels(st.visible.assignment, st.infrared.assignment, *st.match);
    const auto ari = ari_report(st.visible.assignment, st.infrared.assignment, unified, ids_v, ids_r);
    r.ari_rgb = ari.rgb;
    r.ari_ir = ari.ir;
    r.ari_all = ari.all;
  }
  return r;
}

std::vector<EpochReport> train(Trainer& trainer, const Dataset& data,
                               const std::function<void(const EpochReport&)>& on_epoch) {
  std::vector<EpochReport> reports;
  auto emit = [&](EpochReport r) {
    if (on_epoch) on_epoch(r);
    reports.push_back(std::move(r));
  };
  if (trainer.state().epoch == 0) {
    trainer.prepare_epoch(0);
    trainer.refresh_match();
    emit(evaluate(trainer, data, 0, {}));
  }
  while (trainer.state().epoch < trainer.config().epochs) {
    const EpochLosses losses = trainer.run_epoch();
    emit(evaluate(trainer, data, trainer.state().epoch, losses));
  }
  return reports;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "epoch",  "loss_cpcl", "loss_hpcl", "loss_dpcl", "loss_total", "ari_rgb",      "ari_ir",      "ari_all",
      "rank1",  "rank5",     "rank10",    "rank20",    "map",        "n_clusters_v", "n_clusters_r"};
  return cols;
}

namespace {

std::string fmt_real(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_metrics_header(std::ostream& os) {
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

void write_metrics_row(std::ostream& os, const EpochReport& r) {
  os << r.epoch << ',' << fmt_real(r.loss_cpcl) << ',' << fmt_real(r.loss_hpcl) << ',' << fmt_real(r.loss_dpcl) << ','
     << fmt_real(r.loss_total) << ',' << fmt_real(r.ari_rgb) << ',' << fmt_real(r.ari_ir) << ',' << fmt_real(r.ari_all)
     << ',' << fmt_real(r.rank1) << ',' << fmt_real(r.rank5) << ',' << fmt_real(r.rank10) << ',' << fmt_real(r.rank20)
     << ',' << fmt_real(r.map) << ',' << r.n_clusters_v << ',' << r.n_clusters_r << '\n';
}

std::string report_to_json(const EpochReport& r) {
  auto real = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["loss_cpcl"] = real(r.loss_cpcl);
  j["loss_hpcl"] = real(r.loss_hpcl);
  j["loss_dpcl"] = real(r.loss_dpcl);
  j["loss_total"] = real(r.loss_total);
  j["ari_rgb"] = real(r.ari_rgb);
  j["ari_ir"] = real(r.ari_ir);
  j["ari_all"] = real(r.ari_all);
  j["rank1"] = r.rank1;
  j["rank5"] = r.rank5;
  j["rank10"] = r.rank10;
  j["rank20"] = r.rank20;
  j["map"] = r.map;
  j["n_clusters_v"] = r.n_clusters_v;
  j["n_clusters_r"] = r.n_clusters_r;
  return j.dump(2) + "\n";
}

}  // namespace pclmp

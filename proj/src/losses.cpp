#include "pclmp/losses.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "pclmp/error.hpp"

namespace pclmp {

namespace {

void require(bool ok, const char* field, const std::string& rule) {
  if (!ok) throw Error(Errc::InvalidConfig, std::string(field) + " " + rule);
}

bool unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

// Per-modality mean term, writing gradient rows into `grad`.
double modality_term(const QueryTerms& terms, double tau, Matrix& grad) {
  const std::size_t n = terms.size();
  const std::size_t d = terms.queries ? terms.queries->cols : 0;
  grad = Matrix(n, d);
  if (n == 0) return 0.0;
  if (terms.queries->rows != n || terms.banks.size() != n)
    throw Error(Errc::LengthMismatch, "query terms are not aligned");
  std::vector<double> losses(n);
  std::vector<std::optional<Error>> errors(n);
  const double scale = 1.0 / static_cast<double>(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto i = static_cast<std::size_t>(s);
    try {
      auto r = info_nce(terms.queries->row(i), *terms.banks[i], terms.positives[i], tau);
      losses[i] = r.loss;
      auto g = grad.row(i);
      for (std::size_t j = 0; j < d; ++j) g[j] = r.grad[j] * scale;
    } catch (const Error& e) {
      errors[i] = e;
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) throw *errors[i];
    sum += losses[i];
  }
  return sum * scale;
}

}  // namespace

void HyperParams::validate() const {
  require(tau > 0.0 && std::isfinite(tau), "tau", "must be > 0");
  require(unit_interval(alpha), "alpha", "must be in [0,1]");
  require(unit_interval(beta), "beta", "must be in [0,1]");
  require(unit_interval(lambda), "lambda", "must be in [0,1]");
  require(e_cpcl >= 0, "e_cpcl", "must be >= 0");
  require(k >= 1, "k", "must be >= 1");
  require(M >= 1, "M", "must be >= 1");
  require(eps > 0.0 && std::isfinite(eps), "eps", "must be > 0");
  require(min_pts >= 1, "min_pts", "must be >= 1");
  require(P >= 2, "P", "must be >= 2");
  require(K >= 1, "K", "must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), "lr", "must be > 0");
  require(lr_decay_every >= 0, "lr_decay_every", "must be >= 0 (0 disables decay)");
  require(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0, "lr_decay_factor", "must be in (0,1]");
}

InfoNceResult info_nce(std::span<const double> query, const Matrix& bank, std::size_t pos, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::NonPositiveTau, "temperature must be positive");
  if (bank.rows == 0) throw Error(Errc::EmptyInput, "empty prototype bank");
  if (pos >= bank.rows) throw Error(Errc::InvalidIndex, "positive index " + std::to_string(pos) + " outside bank");
  if (bank.cols != query.size()) throw Error(Errc::DimMismatch, "bank and query differ in dimension");

  std::vector<double> logits(bank.rows);
  for (std::size_t i = 0; i < bank.rows; ++i) logits[i] = dot(query, bank.row(i)) / tau;
  // -log p_pos computed as logsumexp - logit_pos for accuracy when p_pos ~ 1.
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  InfoNceResult r;
  r.loss = mx + std::log(z) - logits[pos];

  const Vec p = stable_softmax(logits);
  r.grad.assign(query.size(), 0.0);
  for (std::size_t i = 0; i < bank.rows; ++i) {
    const auto b = bank.row(i);
    for (std::size_t j = 0; j < r.grad.size(); ++j) r.grad[j] += p[i] * b[j];
  }
  const auto bp = bank.row(pos);
  for (std::size_t j = 0; j < r.grad.size(); ++j) r.grad[j] = (r.grad[j] - bp[j]) / tau;
  return r;
}

QueryTerms QueryTerms::shared_bank(const Matrix& queries, const Matrix& bank, std::span<const int> labels) {
  if (labels.size() != queries.rows) throw Error(Errc::LengthMismatch, "labels and queries differ in length");
  QueryTerms t;
  t.queries = &queries;
  t.banks.assign(queries.rows, &bank);
  t.positives.reserve(labels.size());
  for (int l : labels) {
    if (l < 0) throw Error(Errc::InvalidLabel, "noise records cannot be queries");
    t.positives.push_back(static_cast<std::size_t>(l));
  }
  return t;
}

LossOutput bimodal_loss(const QueryTerms& visible, const QueryTerms& infrared, double tau) {
  LossOutput out;
  const double v = modality_term(visible, tau, out.grad_v);
  const double r = modality_term(infrared, tau, out.grad_r);
  out.value = v + r;
  return out;
}

LossOutput weighted_sum(std::span<const std::pair<double, const LossOutput*>> terms) {
  if (terms.empty()) throw Error(Errc::EmptyInput, "no loss terms to combine");
  const LossOutput& first = *terms.front().second;
  LossOutput out;
  out.grad_v = Matrix(first.grad_v.rows, first.grad_v.cols);
  out.grad_r = Matrix(first.grad_r.rows, first.grad_r.cols);
  for (const auto& [w, t] : terms) {
    if (t->grad_v.rows != out.grad_v.rows || t->grad_r.rows != out.grad_r.rows)
      throw Error(Errc::ShapeMismatch, "combined losses come from different batches");
    out.value += w * t->value;
    for (std::size_t i = 0; i < out.grad_v.data.size(); ++i) out.grad_v.data[i] += w * t->grad_v.data[i];
    for (std::size_t i = 0; i < out.grad_r.data.size(); ++i) out.grad_r.data[i] += w * t->grad_r.data[i];
  }
  return out;
}

LossPhase phase_for_epoch(int epoch, int e_cpcl) {
  return epoch <= e_cpcl ? LossPhase::Centroid : LossPhase::HardDynamic;
}

LossOutput pclmp_loss(int epoch, const HyperParams& hp, const LossOutput* cpcl, const LossOutput* hpcl,
                      const LossOutput* dpcl) {
  if (phase_for_epoch(epoch, hp.e_cpcl) == LossPhase::Centroid) {
    if (!cpcl) throw Error(Errc::EmptyInput, "centroid phase needs the CPCL term");
    return *cpcl;
  }
  if (!hpcl || !dpcl) throw Error(Errc::EmptyInput, "hard phase needs both HPCL and DPCL terms");
  const std::pair<double, const LossOutput*> terms[] = {{hp.lambda, hpcl}, {1.0 - hp.lambda, dpcl}};
  return weighted_sum(terms);
}

}  // namespace pclmp

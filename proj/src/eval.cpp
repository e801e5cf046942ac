#include "pclmp/eval.hpp"

#include <algorithm>
#include <numeric>

#include "pclmp/error.hpp"
#include "pclmp/kernels.hpp"

namespace pclmp {

bool RankedList::has_relevant() const {
  return std::any_of(relevant.begin(), relevant.end(), [](char c) { return c != 0; });
}

RankedList rank_gallery(std::span<const double> similarities, std::optional<int> query_id,
                        std::span<const std::optional<int>> gallery_ids) {
  if (similarities.size() != gallery_ids.size()) throw Error(Errc::LengthMismatch, "similarities and gallery ids differ");
  RankedList r;
  r.order.resize(similarities.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return similarities[a] > similarities[b]; });
  r.relevant.resize(r.order.size());
  for (std::size_t k = 0; k < r.order.size(); ++k) {
    const auto& g = gallery_ids[r.order[k]];
    r.relevant[k] = query_id && g && *g == *query_id;
  }
  return r;
}

std::vector<RankedList> retrieve(const Matrix& queries, std::span<const std::optional<int>> query_ids,
                                 const Matrix& gallery, std::span<const std::optional<int>> gallery_ids) {
  if (query_ids.size() != queries.rows) throw Error(Errc::LengthMismatch, "query ids and queries differ");
  const Matrix sim = kernels::parallel::similarity(queries, gallery);
  std::vector<RankedList> out(queries.rows);
  const auto n = static_cast<std::ptrdiff_t>(queries.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto q = static_cast<std::size_t>(i);
    out[q] = rank_gallery(sim.row(q), query_ids[q], gallery_ids);
  }
  return out;
}

CmcResult cmc(std::span<const RankedList> results, std::span<const int> ranks) {
  CmcResult out;
  out.accuracy.assign(ranks.size(), 0.0);
  for (const auto& r : results) {
    const auto first = std::find(r.relevant.begin(), r.relevant.end(), 1);
    if (first == r.relevant.end()) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    const auto pos = static_cast<int>(first - r.relevant.begin());
    for (std::size_t k = 0; k < ranks.size(); ++k)
      if (pos < ranks[k]) out.accuracy[k] += 1.0;
  }
  if (out.evaluated == 0) throw Error(Errc::NoRelevantItem, "no query has a relevant gallery item");
  for (double& a : out.accuracy) a /= static_cast<double>(out.evaluated);
  return out;
}

double average_precision(const RankedList& r) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < r.relevant.size(); ++k) {
    if (!r.relevant[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) throw Error(Errc::NoRelevantItem, "query has no relevant gallery item");
  return sum / static_cast<double>(hits);
}

MapResult mean_average_precision(std::span<const RankedList> results) {
  MapResult out;
  double sum = 0.0;
  for (const auto& r : results) {
    if (!r.has_relevant()) {
      ++out.skipped;
      continue;
    }
    ++out.evaluated;
    sum += average_precision(r);
  }
  if (out.evaluated == 0) throw Error(Errc::NoRelevantItem, "no query has a relevant gallery item");
  out.map = sum / static_cast<double>(out.evaluated);
  return out;
}

namespace {

void keep_known(std::span<const int> labels, std::span<const std::optional<int>> ids, std::vector<int>& out_labels,
                std::vector<int>& out_ids) {
  if (labels.size() != ids.size()) throw Error(Errc::LengthMismatch, "labels and ground truth differ in length");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!ids[i]) continue;
    out_labels.push_back(labels[i]);
    out_ids.push_back(*ids[i]);
  }
}

}  // namespace

AriReport ari_report(const ClusterAssignment& visible, const ClusterAssignment& infrared, const UnifiedLabels& unified,
                     std::span<const std::optional<int>> true_visible, std::span<const std::optional<int>> true_infrared) {
  std::vector<int> lv, iv, lr, ir, la, ia;
  keep_known(visible.labels, true_visible, lv, iv);
  keep_known(infrared.labels, true_infrared, lr, ir);
  keep_known(unified.visible, true_visible, la, ia);
  keep_known(unified.infrared, true_infrared, la, ia);
  if (iv.empty() || ir.empty()) throw Error(Errc::MissingGroundTruth, "ARI needs records with known identities");
  return {adjusted_rand_index(lv, iv), adjusted_rand_index(lr, ir), adjusted_rand_index(la, ia)};
}

RetrievalMetrics evaluate_cross_modal(const Matrix& visible, std::span<const std::optional<int>> visible_ids,
                                      const Matrix& infrared, std::span<const std::optional<int>> infrared_ids) {
  static constexpr int kRanks[] = {1, 5, 10, 20};
  RetrievalMetrics out;
  for (int dir = 0; dir < 2; ++dir) {
    const auto results = dir == 0 ? retrieve(infrared, infrared_ids, visible, visible_ids)
                                  : retrieve(visible, visible_ids, infrared, infrared_ids);
    const auto c = cmc(results, kRanks);
    const auto m = mean_average_precision(results);
    out.rank1 += 0.5 * c.accuracy[0];
    out.rank5 += 0.5 * c.accuracy[1];
    out.rank10 += 0.5 * c.accuracy[2];
    out.rank20 += 0.5 * c.accuracy[3];
    out.map += 0.5 * m.map;
    out.skipped += c.skipped;
  }
  return out;
}

}  // namespace pclmp

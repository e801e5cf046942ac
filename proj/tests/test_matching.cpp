#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pclmp/clustering.hpp"
#include "pclmp/data.hpp"
#include "pclmp/error.hpp"
#include "pclmp/matching.hpp"

using namespace pclmp;

namespace {

ClusterAssignment assignment_of(std::vector<int> labels) {
  ClusterAssignment a;
  a.labels = std::move(labels);
  for (int l : a.labels) a.n_clusters = std::max(a.n_clusters, l + 1);
  return a;
}

double greedy_total(const Matrix& sim) {
  std::vector<char> used(sim.cols, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < sim.rows; ++i) {
    std::size_t best = sim.cols;
    for (std::size_t j = 0; j < sim.cols; ++j)
      if (!used[j] && (best == sim.cols || sim(i, j) > sim(i, best))) best = j;
    used[best] = 1;
    total += sim(i, best);
  }
  return total;
}

}  // namespace

TEST_CASE("permutation recovery") {
  const Matrix v = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const Matrix r = Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
  const auto m = match_prototypes(v, r);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0].visible == 0);
  CHECK(m.pairs[0].infrared == 1);
  CHECK(m.pairs[1].visible == 1);
  CHECK(m.pairs[1].infrared == 0);
  CHECK(m.total_similarity() == doctest::Approx(2.0));
  CHECK(m.unmatched_visible.empty());
  CHECK(m.unmatched_infrared.empty());
}

TEST_CASE("unequal cluster counts") {
  std::mt19937_64 rng(1);
  const Matrix v = oracle::random_unit_rows(rng, 1, 4), r = oracle::random_unit_rows(rng, 3, 4);
  const auto m = match_prototypes(v, r);
  CHECK(m.pairs.size() == 1);
  CHECK(m.unmatched_infrared.size() == 2);
  const auto flipped = match_prototypes(r, v);
  CHECK(flipped.pairs.size() == 1);
  CHECK(flipped.unmatched_visible.size() == 2);
  CHECK(flipped.pairs[0].visible == m.pairs[0].infrared);
  CHECK_THROWS_AS(match_prototypes(Matrix(0, 4), r), Error);
}

TEST_CASE("assignment optimum equals exhaustive search") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const std::size_t rows = 1 + t % 6, cols = 6;
    Matrix sim(rows, cols);
    for (auto& x : sim.data) x = u(rng);
    Matrix cost = sim;
    for (auto& x : cost.data) x = -x;
    const auto cols_of = solve_assignment(cost);
    std::vector<char> seen(cols, 0);
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      CHECK(!seen[cols_of[i]]);
      seen[cols_of[i]] = 1;
      total += sim(i, cols_of[i]);
    }
    CHECK(total == doctest::Approx(oracle::best_assignment_total(sim)).epsilon(1e-12));
    CHECK(greedy_total(sim) <= total + 1e-12);
  }
}

TEST_CASE("matching is equivariant to cluster relabeling") {
  std::mt19937_64 rng(9);
  const Matrix v = oracle::random_unit_rows(rng, 5, 6), r = oracle::random_unit_rows(rng, 5, 6);
  std::vector<std::size_t> perm(5);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix rp(5, 6);
  for (std::size_t i = 0; i < 5; ++i) rp.set_row(i, r.row(perm[i]));
  const auto a = match_prototypes(v, r), b = match_prototypes(v, rp);
  CHECK(a.total_similarity() == doctest::Approx(b.total_similarity()).epsilon(1e-12));
  for (std::size_t i = 0; i < 5; ++i) CHECK(perm[b.pairs[i].infrared] == static_cast<std::size_t>(a.pairs[i].infrared));
}

TEST_CASE("unified labels") {
  SUBCASE("perfect 2+2 match") {
    CrossModalMatch m;
    m.pairs = {{0, 1, 1.0}, {1, 0, 1.0}};
    const auto u = unify_labels(assignment_of({0, 1, kNoise}), assignment_of({1, 0}), m);
    CHECK(u.n_labels == 2);
    CHECK(u.visible == std::vector<int>{0, 1, kNoise});
    CHECK(u.infrared == std::vector<int>{0, 1});
  }
  SUBCASE("no pairs gives the disjoint union") {
    CrossModalMatch m;
    m.unmatched_visible = {0, 1};
    m.unmatched_infrared = {0};
    const auto u = unify_labels(assignment_of({1, 0}), assignment_of({0, 0}), m);
    CHECK(u.n_labels == 3);
    CHECK(u.visible == std::vector<int>{1, 0});
    CHECK(u.infrared == std::vector<int>{2, 2});
  }
  SUBCASE("inconsistent match is rejected") {
    CrossModalMatch m;
    m.pairs = {{0, 3, 1.0}};
    CHECK_THROWS_AS(unify_labels(assignment_of({0, 1}), assignment_of({0}), m), Error);
    m.pairs = {{0, 0, 1.0}, {0, 0, 1.0}};
    CHECK_THROWS_AS(unify_labels(assignment_of({0, 1}), assignment_of({0}), m), Error);
  }
}

TEST_CASE("zero shift: unified labels recover identities") {
  SynthConfig cfg;
  cfg.n_identities = 6;
  cfg.samples_per_id_per_modality = 5;
  cfg.intra_id_spread = 0.01;
  cfg.modality_shift = 0.0;
  const Dataset d = generate_synthetic(cfg);
  ClusterAssignment a[2];
  Matrix centroids[2];
  std::vector<int> truth[2];
  for (int m = 0; m < 2; ++m) {
    const auto idx = d.indices_of(static_cast<Modality>(m));
    Matrix pts(idx.size(), d.dim);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      pts.set_row(i, d.records[idx[i]].raw);
      truth[m].push_back(*d.records[idx[i]].true_id);
    }
    a[m] = dbscan(pts, 0.1, 2);
    REQUIRE(a[m].n_clusters == 6);
    centroids[m] = Matrix(6, d.dim);
    const auto members = a[m].members();
    for (int c = 0; c < 6; ++c) {
      Vec s(d.dim, 0.0);
      for (auto i : members[c])
        for (std::size_t j = 0; j < d.dim; ++j) s[j] += pts(i, j);
      centroids[m].set_row(c, l2_normalize(s));
    }
  }
  const auto u = unify_labels(a[0], a[1], match_prototypes(centroids[0], centroids[1]));
  std::vector<int> all = u.visible, ids = truth[0];
  all.insert(all.end(), u.infrared.begin(), u.infrared.end());
  ids.insert(ids.end(), truth[1].begin(), truth[1].end());
  CHECK(adjusted_rand_index(all, ids) == 1.0);
}

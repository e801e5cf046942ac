#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "pclmp/error.hpp"
#include "pclmp/losses.hpp"

using namespace pclmp;

namespace {

double naive_nce(std::span<const double> q, const Matrix& bank, std::size_t pos, double tau) {
  double denom = 0.0;
  for (std::size_t i = 0; i < bank.rows; ++i) denom += std::exp(dot(q, bank.row(i)) / tau);
  return -std::log(std::exp(dot(q, bank.row(pos)) / tau) / denom);
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::EmptyInput;
}

LossOutput constant_output(double value, double g) {
  LossOutput o;
  o.value = value;
  o.grad_v = Matrix(2, 3);
  o.grad_r = Matrix(1, 3);
  for (auto& x : o.grad_v.data) x = g;
  for (auto& x : o.grad_r.data) x = -g;
  return o;
}

}  // namespace

TEST_CASE("info_nce examples") {
  const Matrix bank = Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}});
  CHECK(info_nce(Vec{1.0, 0.0}, bank, 2, 0.05).loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  const Matrix two = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const auto r = info_nce(Vec{1.0, 0.0}, two, 0, 1.0);
  CHECK(r.loss == doctest::Approx(0.31326).epsilon(1e-5));
  CHECK(r.loss == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))).epsilon(1e-14));
}

TEST_CASE("info_nce is stable at small temperatures") {
  const Matrix bank = Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
  const auto r = info_nce(Vec{1.0, 0.0}, bank, 1, 1e-4);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(2.0 / 1e-4));
  CHECK(all_finite(r.grad));
}

TEST_CASE("info_nce errors") {
  const Matrix bank = Matrix::from_rows({{1.0, 0.0}});
  CHECK(code_of([&] { info_nce(Vec{1.0, 0.0}, bank, 0, 0.0); }) == Errc::NonPositiveTau);
  CHECK(code_of([&] { info_nce(Vec{1.0, 0.0}, Matrix(0, 2), 0, 1.0); }) == Errc::EmptyInput);
  CHECK(code_of([&] { info_nce(Vec{1.0, 0.0}, bank, 1, 1.0); }) == Errc::InvalidIndex);
  CHECK(code_of([&] { info_nce(Vec{1.0, 0.0, 0.0}, bank, 0, 1.0); }) == Errc::DimMismatch);
}

TEST_CASE("info_nce gradient matches central differences") {
  std::mt19937_64 rng(55);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Vec q = oracle::random_unit(rng, 8);
    const Matrix bank = oracle::random_unit_rows(rng, 6, 8);
    const std::size_t pos = static_cast<std::size_t>(t) % 6;
    const auto r = info_nce(q, bank, pos, 0.05);
    CHECK(r.loss == doctest::Approx(naive_nce(q, bank, pos, 0.05)).epsilon(1e-10));
    for (std::size_t j = 0; j < 8; ++j) {
      const double fd = oracle::central_diff(
          [&](double v) {
            Vec p = q;
            p[j] = v;
            return info_nce(p, bank, pos, 0.05).loss;
          },
          q[j]);
      worst = std::max(worst, oracle::rel_err(r.grad[j], fd));
    }
  }
  MESSAGE("max relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("loss ranking over candidate positives is invariant to temperature") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const Vec q = oracle::random_unit(rng, 8);
    const Matrix bank = oracle::random_unit_rows(rng, 7, 8);
    auto argmin_pos = [&](double tau) {
      Vec losses;
      for (std::size_t p = 0; p < bank.rows; ++p) losses.push_back(info_nce(q, bank, p, tau).loss);
      return argmin_idx(losses);
    };
    const std::size_t ref = argmin_pos(0.05);
    for (double tau : {0.01, 0.1, 0.5, 1.0, 5.0}) CHECK(argmin_pos(tau) == ref);
  }
}

TEST_CASE("bimodal loss") {
  std::mt19937_64 rng(3);
  const Matrix qv = oracle::random_unit_rows(rng, 5, 4), qr = oracle::random_unit_rows(rng, 3, 4);
  const Matrix bv = oracle::random_unit_rows(rng, 4, 4), br = oracle::random_unit_rows(rng, 2, 4);
  const std::vector<int> lv{0, 3, 1, 1, 2}, lr{1, 0, 1};
  const auto tv = QueryTerms::shared_bank(qv, bv, lv);
  const auto tr = QueryTerms::shared_bank(qr, br, lr);

  SUBCASE("equals a naive per-query loop") {
    const auto out = bimodal_loss(tv, tr, 0.05);
    double sv = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < 5; ++i) sv += naive_nce(qv.row(i), bv, lv[i], 0.05);
    for (std::size_t i = 0; i < 3; ++i) sr += naive_nce(qr.row(i), br, lr[i], 0.05);
    CHECK(std::abs(out.value - (sv / 5 + sr / 3)) < 1e-9);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto r = info_nce(qv.row(i), bv, lv[i], 0.05);
      for (std::size_t j = 0; j < 4; ++j) CHECK(out.grad_v(i, j) == doctest::Approx(r.grad[j] / 5).epsilon(1e-12));
    }
  }
  SUBCASE("empty infrared batch leaves the visible term") {
    const auto out = bimodal_loss(tv, QueryTerms{}, 0.05);
    double sv = 0.0;
    for (std::size_t i = 0; i < 5; ++i) sv += info_nce(qv.row(i), bv, lv[i], 0.05).loss;
    CHECK(out.value == doctest::Approx(sv / 5).epsilon(1e-14));
    CHECK(out.grad_r.rows == 0);
  }
  SUBCASE("single query per modality is the plain sum") {
    const Matrix q1 = Matrix::from_rows({qv.row_vec(0)}), q2 = Matrix::from_rows({qr.row_vec(0)});
    const std::vector<int> l1{0}, l2{1};
    const auto out = bimodal_loss(QueryTerms::shared_bank(q1, bv, l1), QueryTerms::shared_bank(q2, br, l2), 0.05);
    CHECK(out.value == info_nce(q1.row(0), bv, 0, 0.05).loss + info_nce(q2.row(0), br, 1, 0.05).loss);
  }
  SUBCASE("bad label propagates its error") {
    const std::vector<int> bad{0, 9, 1, 1, 2};
    CHECK(code_of([&] { bimodal_loss(QueryTerms::shared_bank(qv, bv, bad), tr, 0.05); }) == Errc::InvalidIndex);
  }
}

TEST_CASE("progressive combination") {
  HyperParams hp;
  const LossOutput c = constant_output(1.0, 0.5), h = constant_output(2.0, 1.0), d = constant_output(4.0, 3.0);

  SUBCASE("boundary epoch is still centroid only") {
    const auto out = pclmp_loss(50, hp, &c, nullptr, nullptr);
    CHECK(out.value == c.value);
    CHECK(out.grad_v == c.grad_v);
    CHECK(out.grad_r == c.grad_r);
    CHECK(phase_for_epoch(50, 50) == LossPhase::Centroid);
    CHECK(phase_for_epoch(51, 50) == LossPhase::HardDynamic);
  }
  SUBCASE("lambda = 1 is HPCL") {
    hp.lambda = 1.0;
    const auto out = pclmp_loss(51, hp, nullptr, &h, &d);
    CHECK(out.value == h.value);
    CHECK(out.grad_v == h.grad_v);
  }
  SUBCASE("lambda = 0.5 averages") {
    const auto out = pclmp_loss(51, hp, nullptr, &h, &d);
    CHECK(out.value == 3.0);
    CHECK(out.grad_v(0, 0) == 2.0);
    CHECK(out.grad_r(0, 2) == -2.0);
  }
}

TEST_CASE("weighted sum") {
  const LossOutput a = constant_output(1.0, 1.0), b = constant_output(2.0, 2.0);
  const std::pair<double, const LossOutput*> terms[] = {{1.0, &a}, {0.25, &b}};
  const auto out = weighted_sum(terms);
  CHECK(out.value == 1.5);
  CHECK(out.grad_v(1, 1) == 1.5);
}

TEST_CASE("hyperparameter validation names the field") {
  HyperParams hp;
  hp.validate();
  hp.lambda = 1.5;
  try {
    hp.validate();
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidConfig);
    CHECK(std::string(e.what()).find("lambda") != std::string::npos);
  }
  hp = {};
  hp.tau = -1.0;
  CHECK_THROWS_AS(hp.validate(), Error);
  hp = {};
  hp.P = 1;
  CHECK_THROWS_AS(hp.validate(), Error);
}

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pclmp/kernels.hpp"

using namespace pclmp;
namespace k = pclmp::kernels;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (auto& x : m.data) x = g(rng);
  return m;
}

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 37 + 11 * t, in = 5 + t, out = 3 + 2 * t;
    const Matrix x = random_matrix(rng, n, in);
    const Matrix w = random_matrix(rng, out, in);
    const Matrix b = random_matrix(rng, 1, out);
    const Matrix delta = random_matrix(rng, n, out);

    CHECK(k::serial::affine_forward(x, w, b.data) == k::parallel::affine_forward(x, w, b.data));
    CHECK(k::serial::affine_input_grad(delta, w) == k::parallel::affine_input_grad(delta, w));

    Matrix gw1(out, in), gw2(out, in);
    std::vector<double> gb1(out), gb2(out);
    k::serial::affine_param_grad(delta, x, gw1, gb1);
    k::parallel::affine_param_grad(delta, x, gw2, gb2);
    CHECK(gw1 == gw2);
    CHECK(gb1 == gb2);

    const Matrix other = random_matrix(rng, n / 2 + 1, in);
    CHECK(k::serial::similarity(x, other) == k::parallel::similarity(x, other));

    const Matrix pts = oracle::random_unit_rows(rng, n, 3);
    CHECK(k::serial::region_query_all(pts, 0.7) == k::parallel::region_query_all(pts, 0.7));
  }
}

TEST_CASE("affine_forward matches a hand computation") {
  Matrix x(1, 2);
  x.set_row(0, Vec{1, 2});
  Matrix w(2, 2);
  w.set_row(0, Vec{1, 1});
  w.set_row(1, Vec{0, -1});
  const Vec b{0.5, 0};
  const Matrix y = k::parallel::affine_forward(x, w, b);
  CHECK(y(0, 0) == 3.5);
  CHECK(y(0, 1) == -2.0);
}

TEST_CASE("region queries include the point itself and are inclusive") {
  Matrix pts(3, 1);
  pts.set_row(0, Vec{0.0});
  pts.set_row(1, Vec{0.5});
  pts.set_row(2, Vec{2.0});
  const auto nb = k::parallel::region_query_all(pts, 0.5);
  CHECK(nb[0] == std::vector<std::size_t>{0, 1});
  CHECK(nb[1] == std::vector<std::size_t>{0, 1});
  CHECK(nb[2] == std::vector<std::size_t>{2});
}

#pragma once

// Vector kernels shared by every other module. Everything here is a pure
// function; accumulations are done in double precision in index order.

#include <cstddef>
#include <span>
#include <vector>

namespace pclmp {

using Vec = std::vector<double>;

inline constexpr double kZeroNormThreshold = 1e-12;

// Dense row-major matrix. Rows are the unit of work for all batch kernels:
// one row per sample, prototype, or weight output.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void set_row(std::size_t i, std::span<const double> v);
  Vec row_vec(std::size_t i) const { return {row(i).begin(), row(i).end()}; }

  static Matrix from_rows(const std::vector<Vec>& rows);
  bool operator==(const Matrix&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Throws ZeroVector when the norm is at or below kZeroNormThreshold.
Vec l2_normalize(std::span<const double> v);
void l2_normalize_inplace(std::span<double> v);

double euclidean_dist(std::span<const double> a, std::span<const double> b);

// Max-shifted softmax; safe for logits of magnitude 1/tau with small tau.
Vec stable_softmax(std::span<const double> logits);

// Lowest index wins on ties.
std::size_t argmax_idx(std::span<const double> values);
std::size_t argmin_idx(std::span<const double> values);

bool all_finite(std::span<const double> v);

}  // namespace pclmp

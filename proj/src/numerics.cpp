#include "pclmp/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "pclmp/error.hpp"

namespace pclmp {

void Matrix::set_row(std::size_t i, std::span<const double> v) {
  if (v.size() != cols) throw Error(Errc::DimMismatch, "row length differs from matrix width");
  std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(i * cols));
}

Matrix Matrix::from_rows(const std::vector<Vec>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.set_row(i, rows[i]);
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimMismatch, "dot of vectors with different dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec l2_normalize(std::span<const double> v) {
  Vec out(v.begin(), v.end());
  l2_normalize_inplace(out);
  return out;
}

void l2_normalize_inplace(std::span<double> v) {
  const double n = l2_norm(v);
  if (!(n > kZeroNormThreshold)) throw Error(Errc::ZeroVector, "cannot normalize a zero-length vector");
  for (double& x : v) x /= n;
}

double euclidean_dist(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimMismatch, "distance between vectors with different dimension");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

Vec stable_softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error(Errc::EmptyInput, "softmax of empty sequence");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

std::size_t argmax_idx(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "argmax of empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t argmin_idx(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyInput, "argmin of empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return best;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace pclmp

#include "pclmp/kernels.hpp"

#include <omp.h>

#include "pclmp/error.hpp"

namespace pclmp::kernels {

namespace {

void check_affine(const Matrix& x, const Matrix& w, std::size_t bias_len) {
  if (x.cols != w.cols || bias_len != w.rows) throw Error(Errc::DimMismatch, "affine shapes do not agree");
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

namespace serial {

NeighborLists region_query_all(const Matrix& points, double eps) {
  NeighborLists out(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i)
    for (std::size_t j = 0; j < points.rows; ++j)
      if (euclidean_dist(points.row(i), points.row(j)) <= eps) out[i].push_back(j);
  return out;
}

Matrix similarity(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw Error(Errc::DimMismatch, "similarity of differently sized embeddings");
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  return out;
}

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> bias) {
  check_affine(x, w, bias.size());
  Matrix y(x.rows, w.rows);
  for (std::size_t s = 0; s < x.rows; ++s)
    for (std::size_t o = 0; o < w.rows; ++o) {
      double acc = bias[o];
      for (std::size_t k = 0; k < w.cols; ++k) acc += w(o, k) * x(s, k);
      y(s, o) = acc;
    }
  return y;
}

void affine_param_grad(const Matrix& delta, const Matrix& x, Matrix& grad_w, std::span<double> grad_b) {
  if (delta.rows != x.rows || grad_w.rows != delta.cols || grad_w.cols != x.cols || grad_b.size() != delta.cols)
    throw Error(Errc::DimMismatch, "affine gradient shapes do not agree");
  for (std::size_t o = 0; o < delta.cols; ++o) {
    for (std::size_t s = 0; s < delta.rows; ++s) {
      const double d = delta(s, o);
      grad_b[o] += d;
      for (std::size_t k = 0; k < x.cols; ++k) grad_w(o, k) += d * x(s, k);
    }
  }
}

Matrix affine_input_grad(const Matrix& delta, const Matrix& w) {
  if (delta.cols != w.rows) throw Error(Errc::DimMismatch, "affine input gradient shapes do not agree");
  Matrix gx(delta.rows, w.cols);
  for (std::size_t s = 0; s < delta.rows; ++s)
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double d = delta(s, o);
      for (std::size_t k = 0; k < w.cols; ++k) gx(s, k) += d * w(o, k);
    }
  return gx;
}

}  // namespace serial

namespace parallel {

NeighborLists region_query_all(const Matrix& points, double eps) {
  const auto n = static_cast<std::ptrdiff_t>(points.rows);
  NeighborLists out(points.rows);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& nb = out[static_cast<std::size_t>(i)];
    const auto pi = points.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < points.rows; ++j)
      if (euclidean_dist(pi, points.row(j)) <= eps) nb.push_back(j);
  }
  return out;
}

Matrix similarity(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw Error(Errc::DimMismatch, "similarity of differently sized embeddings");
  Matrix out(a.rows, b.rows);
  const auto n = static_cast<std::ptrdiff_t>(a.rows);
  const std::size_t d = a.cols;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* ai = a.data.data() + static_cast<std::size_t>(i) * d;
    double* oi = out.data.data() + static_cast<std::size_t>(i) * b.rows;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data.data() + j * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += ai[k] * bj[k];
      oi[j] = s;
    }
  }
  return out;
}

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> bias) {
  check_affine(x, w, bias.size());
  Matrix y(x.rows, w.rows);
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
  const std::size_t in = w.cols;
  const std::size_t out = w.rows;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const double* xs = x.data.data() + static_cast<std::size_t>(s) * in;
    double* ys = y.data.data() + static_cast<std::size_t>(s) * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w.data.data() + o * in;
      double acc = bias[o];
      for (std::size_t k = 0; k < in; ++k) acc += wo[k] * xs[k];
      ys[o] = acc;
    }
  }
  return y;
}

void affine_param_grad(const Matrix& delta, const Matrix& x, Matrix& grad_w, std::span<double> grad_b) {
  if (delta.rows != x.rows || grad_w.rows != delta.cols || grad_w.cols != x.cols || grad_b.size() != delta.cols)
    throw Error(Errc::DimMismatch, "affine gradient shapes do not agree");
  const auto out = static_cast<std::ptrdiff_t>(delta.cols);
  const std::size_t in = x.cols;
  // Parallel over weight rows; each row still sums samples in order.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < out; ++o) {
    const auto uo = static_cast<std::size_t>(o);
    double* gw = grad_w.data.data() + uo * in;
    for (std::size_t s = 0; s < delta.rows; ++s) {
      const double d = delta.data[s * delta.cols + uo];
      grad_b[uo] += d;
      const double* xs = x.data.data() + s * in;
      for (std::size_t k = 0; k < in; ++k) gw[k] += d * xs[k];
    }
  }
}

Matrix affine_input_grad(const Matrix& delta, const Matrix& w) {
  if (delta.cols != w.rows) throw Error(Errc::DimMismatch, "affine input gradient shapes do not agree");
  Matrix gx(delta.rows, w.cols);
  const auto n = static_cast<std::ptrdiff_t>(delta.rows);
  const std::size_t in = w.cols;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    const double* ds = delta.data.data() + static_cast<std::size_t>(s) * w.rows;
    double* gs = gx.data.data() + static_cast<std::size_t>(s) * in;
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wo = w.data.data() + o * in;
      for (std::size_t k = 0; k < in; ++k) gs[k] += ds[o] * wo[k];
    }
  }
  return gx;
}

}  // namespace parallel

}  // namespace pclmp::kernels

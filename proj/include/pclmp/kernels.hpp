#pragma once

// Data-parallel batch kernels. Each kernel has an OpenMP implementation in
// `parallel` and a plain loop in `serial`. Both accumulate every output
// element in the same order, so their results are bit-identical for any
// thread count; tests check that and bench/ compares their speed.

#include <cstddef>
#include <vector>

#include "pclmp/numerics.hpp"

namespace pclmp::kernels {

// For every point, the ascending indices of points within `eps` (inclusive,
// the point itself included).
using NeighborLists = std::vector<std::vector<std::size_t>>;

namespace serial {

NeighborLists region_query_all(const Matrix& points, double eps);
// out(i, j) = a.row(i) . b.row(j)
Matrix similarity(const Matrix& a, const Matrix& b);
// y = x W^T + b, W is out x in.
Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> bias);
// grad_w += delta^T x, grad_b += column sums of delta (samples in order).
void affine_param_grad(const Matrix& delta, const Matrix& x, Matrix& grad_w, std::span<double> grad_b);
// grad_x = delta W
Matrix affine_input_grad(const Matrix& delta, const Matrix& w);

}  // namespace serial

namespace parallel {

NeighborLists region_query_all(const Matrix& points, double eps);
Matrix similarity(const Matrix& a, const Matrix& b);
Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> bias);
void affine_param_grad(const Matrix& delta, const Matrix& x, Matrix& grad_w, std::span<double> grad_b);
Matrix affine_input_grad(const Matrix& delta, const Matrix& w);

}  // namespace parallel

int max_threads();

}  // namespace pclmp::kernels

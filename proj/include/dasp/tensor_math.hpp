#pragma once

#include <functional>

#include "dasp/tensor.hpp"

namespace dasp {

/// Value-level tensor arithmetic with NumPy broadcasting. Used by the graph
/// ops' forward/backward kernels; module code should normally go through the
/// graph instead.

Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor t_binary(const Tensor& a, const Tensor& b, real (*op)(real, real));
Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_mul(const Tensor& a, const Tensor& b);
Tensor t_div(const Tensor& a, const Tensor& b);

Tensor t_map(const Tensor& a, const std::function<real(real)>& f);
Tensor t_scale(const Tensor& a, real c);

/// Sum g down to `target` shape (reverses broadcasting).
Tensor t_reduce_to(const Tensor& g, const Shape& target);

void t_add_inplace(Tensor& dst, const Tensor& src);  // same shape

}  // namespace dasp

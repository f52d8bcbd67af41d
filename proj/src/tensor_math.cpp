#include "dasp/tensor_math.hpp"

#include <algorithm>
#include <cstring>

namespace dasp {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const int n = std::max(a.size(), b.size());
  Shape out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int da = i < n - static_cast<int>(a.size()) ? 1 : a[static_cast<size_t>(i - (n - static_cast<int>(a.size())))];
    const int db = i < n - static_cast<int>(b.size()) ? 1 : b[static_cast<size_t>(i - (n - static_cast<int>(b.size())))];
    DASP_CHECK(da == db || da == 1 || db == 1,
               "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[static_cast<size_t>(i)] = std::max(da, db);
  }
  return out;
}

namespace {

// Strides for indexing `src` as if it had shape `out` (0 where broadcast).
std::vector<std::int64_t> bcast_strides(const Shape& src, const Shape& out) {
  const int n = static_cast<int>(out.size());
  const int off = n - static_cast<int>(src.size());
  std::vector<std::int64_t> st(static_cast<size_t>(n), 0);
  std::int64_t run = 1;
  for (int i = static_cast<int>(src.size()) - 1; i >= 0; --i) {
    st[static_cast<size_t>(i + off)] = (src[static_cast<size_t>(i)] == 1) ? 0 : run;
    run *= src[static_cast<size_t>(i)];
  }
  return st;
}

}  // namespace

Tensor t_binary(const Tensor& a, const Tensor& b, real (*op)(real, real)) {
  if (a.same_shape(b)) {
    Tensor out(a.shape());
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = op(a[i], b[i]);
    return out;
  }
  const Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor out(os);
  const auto sa = bcast_strides(a.shape(), os);
  const auto sb = bcast_strides(b.shape(), os);
  const int nd = static_cast<int>(os.size());
  std::vector<int> idx(static_cast<size_t>(nd), 0);
  std::int64_t ia = 0, ib = 0;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = op(a[ia], b[ib]);
    for (int d = nd - 1; d >= 0; --d) {
      auto ud = static_cast<size_t>(d);
      if (++idx[ud] < os[ud]) {
        ia += sa[ud];
        ib += sb[ud];
        break;
      }
      ia -= sa[ud] * (os[ud] - 1);
      ib -= sb[ud] * (os[ud] - 1);
      idx[ud] = 0;
    }
  }
  return out;
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  return t_binary(a, b, [](real x, real y) { return x + y; });
}
Tensor t_sub(const Tensor& a, const Tensor& b) {
  return t_binary(a, b, [](real x, real y) { return x - y; });
}
Tensor t_mul(const Tensor& a, const Tensor& b) {
  return t_binary(a, b, [](real x, real y) { return x * y; });
}
Tensor t_div(const Tensor& a, const Tensor& b) {
  return t_binary(a, b, [](real x, real y) { return x / y; });
}

Tensor t_map(const Tensor& a, const std::function<real(real)>& f) {
  Tensor out(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = f(a[i]);
  return out;
}

Tensor t_scale(const Tensor& a, real c) {
  Tensor out(a.shape());
  const std::int64_t n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * c;
  return out;
}

Tensor t_reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  const Shape& gs = g.shape();
  const int n = static_cast<int>(gs.size());
  const int off = n - static_cast<int>(target.size());
  DASP_CHECK(off >= 0, "t_reduce_to: rank grew");
  // Padded target shape aligned to g.
  Shape pt(static_cast<size_t>(n), 1);
  for (size_t i = 0; i < target.size(); ++i) pt[static_cast<size_t>(off) + i] = target[i];

  Tensor out(pt);
  const auto st = bcast_strides(pt, gs);
  std::vector<int> idx(static_cast<size_t>(n), 0);
  std::int64_t io = 0;
  const std::int64_t total = g.numel();
  for (std::int64_t i = 0; i < total; ++i) {
    out[io] += g[i];
    for (int d = n - 1; d >= 0; --d) {
      auto ud = static_cast<size_t>(d);
      if (++idx[ud] < gs[ud]) {
        io += st[ud];
        break;
      }
      io -= st[ud] * (gs[ud] - 1);
      idx[ud] = 0;
    }
  }
  return std::move(out).reshaped(target);
}

void t_add_inplace(Tensor& dst, const Tensor& src) {
  DASP_CHECK(dst.same_shape(src), "t_add_inplace shape mismatch");
  const std::int64_t n = dst.numel();
  for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

}  // namespace dasp

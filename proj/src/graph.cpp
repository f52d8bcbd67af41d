#include "dasp/graph.hpp"

#include <memory>

#include <algorithm>
#include <cmath>

#include "dasp/params.hpp"
#include "dasp/tensor_math.hpp"

namespace dasp {

const Tensor& Var::val() const { return g_->val(id_); }
const Tensor& Var::grad() const { return g_->grad(id_); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(ParamStore& store, int param_id) {
  for (const auto& [pid, nid] : param_nodes_) {
    if (pid == param_id) return Var(this, nid);
  }
  const ParamDef& def = store.def(param_id);
  Var v = leaf(def.value, def.trainable);
  param_nodes_.emplace_back(param_id, v.id());
  return v;
}

const Tensor& Graph::param_grad(int param_id) const {
  static const Tensor kEmpty;
  for (const auto& [pid, nid] : param_nodes_) {
    if (pid == param_id) return nodes_[static_cast<size_t>(nid)].grad;
  }
  return kEmpty;
}

Var Graph::make(Tensor value, std::vector<int> parents, BackwardFn bw) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) {
    if (nodes_[static_cast<size_t>(p)].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::acc(int id, Tensor g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.requires_grad) return;
  DASP_CHECK(g.same_shape(n.value), "gradient shape mismatch at node " + std::to_string(id));
  if (n.grad.empty()) {
    n.grad = std::move(g);
  } else {
    t_add_inplace(n.grad, g);
  }
}

void Graph::backward(const Var& root) {
  DASP_CHECK(root.valid() && &root.graph() == this, "backward: foreign var");
  DASP_CHECK(!ran_backward_, "backward may run only once per graph");
  DASP_CHECK(root.val().numel() == 1, "backward root must be scalar");
  ran_backward_ = true;
  Node& r = nodes_[static_cast<size_t>(root.id())];
  if (!r.requires_grad) return;
  r.grad = Tensor::ones(r.value.shape());
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

// ------------------------------------------------------------------
// elementwise
// ------------------------------------------------------------------

namespace {

Graph& shared_graph(Var a, Var b) {
  DASP_CHECK(&a.graph() == &b.graph(), "vars belong to different graphs");
  return a.graph();
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = shared_graph(a, b);
  const int ia = a.id(), ib = b.id();
  return g.make(t_add(a.val(), b.val()), {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    if (gr.needs_grad(ia)) gr.acc(ia, t_reduce_to(go, gr.val(ia).shape()));
    if (gr.needs_grad(ib)) gr.acc(ib, t_reduce_to(go, gr.val(ib).shape()));
  });
}

Var sub(Var a, Var b) {
  Graph& g = shared_graph(a, b);
  const int ia = a.id(), ib = b.id();
  return g.make(t_sub(a.val(), b.val()), {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    if (gr.needs_grad(ia)) gr.acc(ia, t_reduce_to(go, gr.val(ia).shape()));
    if (gr.needs_grad(ib)) gr.acc(ib, t_reduce_to(t_scale(go, -1.0), gr.val(ib).shape()));
  });
}

Var mul(Var a, Var b) {
  Graph& g = shared_graph(a, b);
  const int ia = a.id(), ib = b.id();
  return g.make(t_mul(a.val(), b.val()), {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    if (gr.needs_grad(ia)) gr.acc(ia, t_reduce_to(t_mul(go, gr.val(ib)), gr.val(ia).shape()));
    if (gr.needs_grad(ib)) gr.acc(ib, t_reduce_to(t_mul(go, gr.val(ia)), gr.val(ib).shape()));
  });
}

Var div(Var a, Var b) {
  Graph& g = shared_graph(a, b);
  const int ia = a.id(), ib = b.id();
  return g.make(t_div(a.val(), b.val()), {ia, ib}, [ia, ib](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    const Tensor& bv = gr.val(ib);
    if (gr.needs_grad(ia)) gr.acc(ia, t_reduce_to(t_div(go, bv), gr.val(ia).shape()));
    if (gr.needs_grad(ib)) {
      Tensor gb = t_mul(go, t_div(gr.val(self), bv));  // -g * (a/b) / b
      gr.acc(ib, t_reduce_to(t_scale(gb, -1.0), bv.shape()));
    }
  });
}

Var neg(Var a) { return mul_scalar(a, -1.0); }

Var add_scalar(Var a, real c) {
  Graph& g = a.graph();
  const int ia = a.id();
  return g.make(t_map(a.val(), [c](real x) { return x + c; }), {ia}, [ia](Graph& gr, int self) {
    gr.acc(ia, gr.grad(self));
  });
}

Var mul_scalar(Var a, real c) {
  Graph& g = a.graph();
  const int ia = a.id();
  return g.make(t_scale(a.val(), c), {ia}, [ia, c](Graph& gr, int self) {
    gr.acc(ia, t_scale(gr.grad(self), c));
  });
}

namespace {

// Unary op with derivative expressed from input x and output y.
Var unary(Var a, real (*f)(real), real (*dfdx)(real, real)) {
  Graph& g = a.graph();
  const int ia = a.id();
  Tensor out = t_map(a.val(), [f](real x) { return f(x); });
  return g.make(std::move(out), {ia}, [ia, dfdx](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    const Tensor& x = gr.val(ia);
    const Tensor& y = gr.val(self);
    Tensor gx(x.shape());
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) gx[i] = go[i] * dfdx(x[i], y[i]);
    gr.acc(ia, std::move(gx));
  });
}

real sigmoid_fn(real x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const real e = std::exp(x);
  return e / (1.0 + e);
}

// sin(sqrt(s))/sqrt(s) and its derivative in s; entire functions of s.
real coef_a_fn(real s) {
  if (s < 1e-4) return 1.0 - s / 6.0 + s * s / 120.0 - s * s * s / 5040.0;
  const real r = std::sqrt(s);
  return std::sin(r) / r;
}
real coef_a_dfn(real s) {
  if (s < 1e-4) return -1.0 / 6.0 + s / 60.0 - s * s / 1680.0;
  const real r = std::sqrt(s);
  return (r * std::cos(r) - std::sin(r)) / (2.0 * r * r * r);
}
real coef_b_fn(real s) {
  if (s < 1e-4) return 0.5 - s / 24.0 + s * s / 720.0 - s * s * s / 40320.0;
  const real r = std::sqrt(s);
  return (1.0 - std::cos(r)) / s;
}
real coef_b_dfn(real s) {
  if (s < 1e-4) return -1.0 / 24.0 + s / 360.0 - s * s / 13440.0;
  const real r = std::sqrt(s);
  return (r * std::sin(r) - 2.0 * (1.0 - std::cos(r))) / (2.0 * s * s);
}

}  // namespace

Var vexp(Var a) {
  return unary(a, [](real x) { return std::exp(x); }, [](real, real y) { return y; });
}
Var vlog(Var a) {
  return unary(a, [](real x) { return std::log(x); }, [](real x, real) { return 1.0 / x; });
}
Var vsqrt(Var a) {
  return unary(a, [](real x) { return std::sqrt(x); }, [](real, real y) { return 0.5 / y; });
}
Var vabs(Var a) {
  return unary(a, [](real x) { return std::abs(x); },
               [](real x, real) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}
Var square(Var a) {
  return unary(a, [](real x) { return x * x; }, [](real x, real) { return 2.0 * x; });
}
Var sigmoid(Var a) {
  return unary(a, sigmoid_fn, [](real, real y) { return y * (1.0 - y); });
}
Var elu(Var a) {
  return unary(a, [](real x) { return x > 0 ? x : std::expm1(x); },
               [](real x, real y) { return x > 0 ? 1.0 : y + 1.0; });
}
Var rot_coef_a(Var s) {
  return unary(s, coef_a_fn, [](real x, real) { return coef_a_dfn(x); });
}
Var rot_coef_b(Var s) {
  return unary(s, coef_b_fn, [](real x, real) { return coef_b_dfn(x); });
}

Var clamp_min(Var a, real c) {
  Graph& g = a.graph();
  const int ia = a.id();
  return g.make(t_map(a.val(), [c](real x) { return std::max(x, c); }), {ia},
              [ia, c](Graph& gr, int self) {
                const Tensor& go = gr.grad(self);
                const Tensor& x = gr.val(ia);
                Tensor gx(x.shape());
                for (std::int64_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > c ? go[i] : 0.0;
                gr.acc(ia, std::move(gx));
              });
}

// ------------------------------------------------------------------
// reductions
// ------------------------------------------------------------------

Var sum_all(Var a) {
  Graph& g = a.graph();
  const int ia = a.id();
  return g.make(Tensor::scalar(a.val().sum()), {ia}, [ia](Graph& gr, int self) {
    gr.acc(ia, Tensor::full(gr.val(ia).shape(), gr.grad(self)[0]));
  });
}

Var mean_all(Var a) {
  DASP_CHECK(a.val().numel() > 0, "mean_all on empty tensor");
  return mul_scalar(sum_all(a), 1.0 / static_cast<real>(a.val().numel()));
}

namespace {

// Decompose an axis of `shape` into (outer, axis_len, inner) strides.
void axis_split(const Shape& s, int axis, std::int64_t& outer, std::int64_t& len, std::int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

Shape drop_or_keep_axis(const Shape& s, int axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[static_cast<size_t>(axis)] = 1;
  } else {
    out.erase(out.begin() + axis);
  }
  return out;
}

int norm_axis(const Shape& s, int axis) {
  const int nd = static_cast<int>(s.size());
  if (axis < 0) axis += nd;
  DASP_CHECK(axis >= 0 && axis < nd, "axis out of range");
  return axis;
}

}  // namespace

Var sum_axis(Var a, int axis, bool keepdim) {
  Graph& g = a.graph();
  const int ia = a.id();
  const Shape& s = a.val().shape();
  axis = norm_axis(s, axis);
  std::int64_t outer, len, inner;
  axis_split(s, axis, outer, len, inner);
  Tensor out(drop_or_keep_axis(s, axis, keepdim));
  const Tensor& x = a.val();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t k = 0; k < len; ++k)
      for (std::int64_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * len + k) * inner + i];
  return g.make(std::move(out), {ia}, [ia, outer, len, inner](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ia).shape());
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < len; ++k)
        for (std::int64_t i = 0; i < inner; ++i) gx[(o * len + k) * inner + i] = go[o * inner + i];
    gr.acc(ia, std::move(gx));
  });
}

Var mean_axis(Var a, int axis, bool keepdim) {
  axis = norm_axis(a.val().shape(), axis);
  const real n = static_cast<real>(a.val().shape()[static_cast<size_t>(axis)]);
  return mul_scalar(sum_axis(a, axis, keepdim), 1.0 / n);
}

Var max_axis(Var a, int axis, bool keepdim) {
  Graph& g = a.graph();
  const int ia = a.id();
  const Shape& s = a.val().shape();
  axis = norm_axis(s, axis);
  std::int64_t outer, len, inner;
  axis_split(s, axis, outer, len, inner);
  Tensor out(drop_or_keep_axis(s, axis, keepdim));
  auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<size_t>(outer * inner));
  const Tensor& x = a.val();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i) {
      real best = x[o * len * inner + i];
      std::int64_t bk = 0;
      for (std::int64_t k = 1; k < len; ++k) {
        const real v = x[(o * len + k) * inner + i];
        if (v > best) {
          best = v;
          bk = k;
        }
      }
      out[o * inner + i] = best;
      (*argmax)[static_cast<size_t>(o * inner + i)] = bk;
    }
  return g.make(std::move(out), {ia}, [ia, argmax, outer, len, inner](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ia).shape());
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t i = 0; i < inner; ++i) {
        const std::int64_t bk = (*argmax)[static_cast<size_t>(o * inner + i)];
        gx[(o * len + bk) * inner + i] = go[o * inner + i];
      }
    gr.acc(ia, std::move(gx));
  });
}

// ------------------------------------------------------------------
// movement
// ------------------------------------------------------------------

Var reshape(Var a, Shape s) {
  Graph& g = a.graph();
  const int ia = a.id();
  Tensor out = a.val().reshaped(std::move(s));
  return g.make(std::move(out), {ia}, [ia](Graph& gr, int self) {
    gr.acc(ia, gr.grad(self).reshaped(gr.val(ia).shape()));
  });
}

namespace {

Tensor permute_val(const Tensor& x, const std::vector<int>& axes) {
  const Shape& s = x.shape();
  const int nd = static_cast<int>(s.size());
  DASP_CHECK(static_cast<int>(axes.size()) == nd, "permute: axes rank mismatch");
  Shape os(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) os[static_cast<size_t>(i)] = s[static_cast<size_t>(axes[static_cast<size_t>(i)])];
  // strides of source
  std::vector<std::int64_t> sst(static_cast<size_t>(nd), 1);
  for (int i = nd - 2; i >= 0; --i)
    sst[static_cast<size_t>(i)] = sst[static_cast<size_t>(i + 1)] * s[static_cast<size_t>(i + 1)];
  std::vector<std::int64_t> step(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) step[static_cast<size_t>(i)] = sst[static_cast<size_t>(axes[static_cast<size_t>(i)])];
  Tensor out(os);
  std::vector<int> idx(static_cast<size_t>(nd), 0);
  std::int64_t src = 0;
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = x[src];
    for (int d = nd - 1; d >= 0; --d) {
      auto ud = static_cast<size_t>(d);
      if (++idx[ud] < os[ud]) {
        src += step[ud];
        break;
      }
      src -= step[ud] * (os[ud] - 1);
      idx[ud] = 0;
    }
  }
  return out;
}

}  // namespace

Var permute(Var a, std::vector<int> axes) {
  Graph& g = a.graph();
  const int ia = a.id();
  std::vector<int> inv(axes.size());
  for (size_t i = 0; i < axes.size(); ++i) inv[static_cast<size_t>(axes[i])] = static_cast<int>(i);
  return g.make(permute_val(a.val(), axes), {ia}, [ia, inv](Graph& gr, int self) {
    gr.acc(ia, permute_val(gr.grad(self), inv));
  });
}

Var slice(Var a, int axis, int start, int len) {
  Graph& g = a.graph();
  const int ia = a.id();
  const Shape& s = a.val().shape();
  axis = norm_axis(s, axis);
  DASP_CHECK(start >= 0 && len >= 0 && start + len <= s[static_cast<size_t>(axis)], "slice out of range");
  std::int64_t outer, alen, inner;
  axis_split(s, axis, outer, alen, inner);
  Shape os = s;
  os[static_cast<size_t>(axis)] = len;
  Tensor out(os);
  const Tensor& x = a.val();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t k = 0; k < len; ++k)
      std::copy_n(x.data() + ((o * alen + start + k) * inner), inner,
                  out.data() + ((o * len + k) * inner));
  return g.make(std::move(out), {ia}, [ia, axis, start, len, outer, alen, inner](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ia).shape());
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < len; ++k)
        std::copy_n(go.data() + ((o * len + k) * inner), inner,
                    gx.data() + ((o * alen + start + k) * inner));
    gr.acc(ia, std::move(gx));
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  DASP_CHECK(!parts.empty(), "concat of nothing");
  Graph& g = parts[0].graph();
  const Shape& s0 = parts[0].val().shape();
  axis = norm_axis(s0, axis);
  int total = 0;
  for (const Var& p : parts) {
    DASP_CHECK(&p.graph() == &g, "concat across graphs");
    const Shape& s = p.val().shape();
    DASP_CHECK(s.size() == s0.size(), "concat rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      DASP_CHECK(static_cast<int>(i) == axis || s[i] == s0[i], "concat dim mismatch");
    total += s[static_cast<size_t>(axis)];
  }
  Shape os = s0;
  os[static_cast<size_t>(axis)] = total;
  Tensor out(os);
  std::int64_t outer, olen, inner;
  axis_split(os, axis, outer, olen, inner);
  std::vector<int> ids;
  std::vector<int> lens;
  int at = 0;
  for (const Var& p : parts) {
    const int len = p.val().shape()[static_cast<size_t>(axis)];
    const Tensor& x = p.val();
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < len; ++k)
        std::copy_n(x.data() + ((o * len + k) * inner), inner,
                    out.data() + ((o * olen + at + k) * inner));
    ids.push_back(p.id());
    lens.push_back(len);
    at += len;
  }
  return g.make(std::move(out), ids, [ids, lens, outer, olen, inner](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    int at = 0;
    for (size_t pi = 0; pi < ids.size(); ++pi) {
      const int len = lens[pi];
      if (gr.needs_grad(ids[pi])) {
        Tensor gx(gr.val(ids[pi]).shape());
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t k = 0; k < len; ++k)
            std::copy_n(go.data() + ((o * olen + at + k) * inner), inner,
                        gx.data() + ((o * len + k) * inner));
        gr.acc(ids[pi], std::move(gx));
      }
      at += len;
    }
  });
}

Var pad_zero(Var a, int axis, int before, int after) {
  Graph& g = a.graph();
  const int ia = a.id();
  const Shape& s = a.val().shape();
  axis = norm_axis(s, axis);
  DASP_CHECK(before >= 0 && after >= 0, "negative padding");
  std::int64_t outer, len, inner;
  axis_split(s, axis, outer, len, inner);
  Shape os = s;
  os[static_cast<size_t>(axis)] += before + after;
  const std::int64_t olen = os[static_cast<size_t>(axis)];
  Tensor out(os);
  const Tensor& x = a.val();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t k = 0; k < len; ++k)
      std::copy_n(x.data() + ((o * len + k) * inner), inner,
                  out.data() + ((o * olen + before + k) * inner));
  return g.make(std::move(out), {ia}, [ia, before, outer, len, inner, olen](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ia).shape());
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < len; ++k)
        std::copy_n(go.data() + ((o * olen + before + k) * inner), inner,
                    gx.data() + ((o * len + k) * inner));
    gr.acc(ia, std::move(gx));
  });
}

Var pad_replicate2d(Var a, int p) {
  Graph& g = a.graph();
  const int ia = a.id();
  const Shape& s = a.val().shape();
  DASP_CHECK(s.size() >= 2, "pad_replicate2d needs >=2 dims");
  const int H = s[s.size() - 2], W = s[s.size() - 1];
  std::int64_t outer = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) outer *= s[i];
  Shape os = s;
  os[s.size() - 2] = H + 2 * p;
  os[s.size() - 1] = W + 2 * p;
  const int Ho = H + 2 * p, Wo = W + 2 * p;
  Tensor out(os);
  const Tensor& x = a.val();
  for (std::int64_t o = 0; o < outer; ++o) {
    const real* xs = x.data() + o * H * W;
    real* od = out.data() + o * static_cast<std::int64_t>(Ho) * Wo;
    for (int i = 0; i < Ho; ++i) {
      const int si = std::clamp(i - p, 0, H - 1);
      for (int j = 0; j < Wo; ++j) {
        const int sj = std::clamp(j - p, 0, W - 1);
        od[i * Wo + j] = xs[si * W + sj];
      }
    }
  }
  return g.make(std::move(out), {ia}, [ia, p, H, W, Ho, Wo, outer](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ia).shape());
    for (std::int64_t o = 0; o < outer; ++o) {
      real* gs = gx.data() + o * H * W;
      const real* gd = go.data() + o * static_cast<std::int64_t>(Ho) * Wo;
      for (int i = 0; i < Ho; ++i) {
        const int si = std::clamp(i - p, 0, H - 1);
        for (int j = 0; j < Wo; ++j) {
          const int sj = std::clamp(j - p, 0, W - 1);
          gs[si * W + sj] += gd[i * Wo + j];
        }
      }
    }
    gr.acc(ia, std::move(gx));
  });
}

Var detach(Var a) { return a.graph().leaf(a.val(), false); }

}  // namespace dasp

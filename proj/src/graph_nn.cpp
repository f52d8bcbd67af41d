#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "dasp/graph.hpp"
#include "dasp/tensor_math.hpp"

namespace dasp {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Graph& shared_graph(Var a, Var b) {
  DASP_CHECK(&a.graph() == &b.graph(), "vars belong to different graphs");
  return a.graph();
}

struct ConvDims {
  int n, cin, h, w, cout, kh, kw, stride, ph, pw, ho, wo;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int ph, int pw) {
  DASP_CHECK(xs.size() == 4 && ws.size() == 4, "conv2d expects 4-d input and weight");
  ConvDims d;
  d.n = xs[0];
  d.cin = xs[1];
  d.h = xs[2];
  d.w = xs[3];
  d.cout = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  d.stride = stride;
  d.ph = ph;
  d.pw = pw;
  DASP_CHECK(ws[1] == d.cin, "conv2d channel mismatch: input " + shape_str(xs) + " weight " + shape_str(ws));
  d.ho = (d.h + 2 * ph - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pw - d.kw) / stride + 1;
  DASP_CHECK(d.ho > 0 && d.wo > 0, "conv2d output would be empty");
  return d;
}

// cols: [cin*kh*kw, ho*wo] for one sample.
void im2col(const real* x, const ConvDims& d, real* cols) {
  const int K = d.cin * d.kh * d.kw;
  for (int c = 0; c < d.cin; ++c)
    for (int ki = 0; ki < d.kh; ++ki)
      for (int kj = 0; kj < d.kw; ++kj) {
        const int row = (c * d.kh + ki) * d.kw + kj;
        real* out = cols + static_cast<std::int64_t>(row) * d.ho * d.wo;
        for (int oi = 0; oi < d.ho; ++oi) {
          const int si = oi * d.stride + ki - d.ph;
          for (int oj = 0; oj < d.wo; ++oj) {
            const int sj = oj * d.stride + kj - d.pw;
            out[oi * d.wo + oj] =
                (si >= 0 && si < d.h && sj >= 0 && sj < d.w) ? x[(c * d.h + si) * d.w + sj] : 0.0;
          }
        }
      }
  (void)K;
}

void col2im_acc(const real* cols, const ConvDims& d, real* gx) {
  for (int c = 0; c < d.cin; ++c)
    for (int ki = 0; ki < d.kh; ++ki)
      for (int kj = 0; kj < d.kw; ++kj) {
        const int row = (c * d.kh + ki) * d.kw + kj;
        const real* in = cols + static_cast<std::int64_t>(row) * d.ho * d.wo;
        for (int oi = 0; oi < d.ho; ++oi) {
          const int si = oi * d.stride + ki - d.ph;
          if (si < 0 || si >= d.h) continue;
          for (int oj = 0; oj < d.wo; ++oj) {
            const int sj = oj * d.stride + kj - d.pw;
            if (sj < 0 || sj >= d.w) continue;
            gx[(c * d.h + si) * d.w + sj] += in[oi * d.wo + oj];
          }
        }
      }
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = shared_graph(a, b);
  const Shape& as = a.val().shape();
  const Shape& bs = b.val().shape();
  DASP_CHECK((as.size() == 2 && bs.size() == 2) || (as.size() == 3 && bs.size() == 3),
             "matmul expects both 2-d or both 3-d, got " + shape_str(as) + " x " + shape_str(bs));
  const bool batched = as.size() == 3;
  const int B = batched ? as[0] : 1;
  const int M = batched ? as[1] : as[0];
  const int K = batched ? as[2] : as[1];
  const int Kb = batched ? bs[1] : bs[0];
  const int N = batched ? bs[2] : bs[1];
  DASP_CHECK(K == Kb && (!batched || bs[0] == B),
             "matmul dim mismatch " + shape_str(as) + " x " + shape_str(bs));

  Tensor out(batched ? Shape{B, M, N} : Shape{M, N});
  for (int i = 0; i < B; ++i) {
    ConstMatMap ma(a.val().data() + static_cast<std::int64_t>(i) * M * K, M, K);
    ConstMatMap mb(b.val().data() + static_cast<std::int64_t>(i) * K * N, K, N);
    MatMap mo(out.data() + static_cast<std::int64_t>(i) * M * N, M, N);
    mo.noalias() = ma * mb;
  }
  const int ia = a.id(), ib = b.id();
  return g.make(std::move(out), {ia, ib}, [ia, ib, B, M, K, N](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    if (gr.needs_grad(ia)) {
      Tensor ga(gr.val(ia).shape());
      for (int i = 0; i < B; ++i) {
        ConstMatMap mg(go.data() + static_cast<std::int64_t>(i) * M * N, M, N);
        ConstMatMap mb(gr.val(ib).data() + static_cast<std::int64_t>(i) * K * N, K, N);
        MatMap mo(ga.data() + static_cast<std::int64_t>(i) * M * K, M, K);
        mo.noalias() = mg * mb.transpose();
      }
      gr.acc(ia, std::move(ga));
    }
    if (gr.needs_grad(ib)) {
      Tensor gb(gr.val(ib).shape());
      for (int i = 0; i < B; ++i) {
        ConstMatMap ma(gr.val(ia).data() + static_cast<std::int64_t>(i) * M * K, M, K);
        ConstMatMap mg(go.data() + static_cast<std::int64_t>(i) * M * N, M, N);
        MatMap mo(gb.data() + static_cast<std::int64_t>(i) * K * N, K, N);
        mo.noalias() = ma.transpose() * mg;
      }
      gr.acc(ib, std::move(gb));
    }
  });
}

Var softmax_lastdim(Var a) {
  Graph& g = a.graph();
  const Shape& s = a.val().shape();
  DASP_CHECK(!s.empty(), "softmax on scalar");
  const std::int64_t L = s.back();
  const std::int64_t rows = a.val().numel() / L;
  Tensor out(s);
  const Tensor& x = a.val();
  for (std::int64_t r = 0; r < rows; ++r) {
    const real* xr = x.data() + r * L;
    real* yr = out.data() + r * L;
    real m = xr[0];
    for (std::int64_t i = 1; i < L; ++i) m = std::max(m, xr[i]);
    real sum = 0;
    for (std::int64_t i = 0; i < L; ++i) {
      yr[i] = std::exp(xr[i] - m);
      sum += yr[i];
    }
    for (std::int64_t i = 0; i < L; ++i) yr[i] /= sum;
  }
  const int ia = a.id();
  return g.make(std::move(out), {ia}, [ia, rows, L](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    const Tensor& y = gr.val(self);
    Tensor gx(y.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
      const real* yr = y.data() + r * L;
      const real* gr_ = go.data() + r * L;
      real dot = 0;
      for (std::int64_t i = 0; i < L; ++i) dot += gr_[i] * yr[i];
      real* gxr = gx.data() + r * L;
      for (std::int64_t i = 0; i < L; ++i) gxr[i] = yr[i] * (gr_[i] - dot);
    }
    gr.acc(ia, std::move(gx));
  });
}

Var conv2d(Var x, Var w, Var bias, int stride, int pad_h, int pad_w) {
  Graph& g = shared_graph(x, w);
  const ConvDims d = conv_dims(x.val().shape(), w.val().shape(), stride, pad_h, pad_w);
  const int K = d.cin * d.kh * d.kw;
  const std::int64_t P = static_cast<std::int64_t>(d.ho) * d.wo;

  Tensor out(Shape{d.n, d.cout, d.ho, d.wo});
  std::vector<real> cols(static_cast<size_t>(K) * P);
  ConstMatMap wm(w.val().data(), d.cout, K);
  for (int n = 0; n < d.n; ++n) {
    im2col(x.val().data() + static_cast<std::int64_t>(n) * d.cin * d.h * d.w, d, cols.data());
    ConstMatMap cm(cols.data(), K, P);
    MatMap om(out.data() + static_cast<std::int64_t>(n) * d.cout * P, d.cout, P);
    om.noalias() = wm * cm;
  }
  const bool has_bias = bias.valid();
  if (has_bias) {
    DASP_CHECK((bias.val().shape() == Shape{d.cout}), "conv2d bias shape");
    for (int n = 0; n < d.n; ++n)
      for (int c = 0; c < d.cout; ++c) {
        real* o = out.data() + (static_cast<std::int64_t>(n) * d.cout + c) * P;
        const real bv = bias.val()[c];
        for (std::int64_t i = 0; i < P; ++i) o[i] += bv;
      }
  }

  std::vector<int> parents{x.id(), w.id()};
  if (has_bias) parents.push_back(bias.id());
  const int ix = x.id(), iw = w.id(), ibias = has_bias ? bias.id() : -1;
  return g.make(std::move(out), parents, [ix, iw, ibias, d, K, P](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    std::vector<real> cols(static_cast<size_t>(K) * P);
    const bool need_x = gr.needs_grad(ix);
    const bool need_w = gr.needs_grad(iw);
    Tensor gxt, gwt = Tensor::zeros(gr.val(iw).shape());
    if (need_x) gxt = Tensor::zeros(gr.val(ix).shape());
    ConstMatMap wm(gr.val(iw).data(), d.cout, K);
    MatMap gw(gwt.data(), d.cout, K);
    for (int n = 0; n < d.n; ++n) {
      ConstMatMap gom(go.data() + static_cast<std::int64_t>(n) * d.cout * P, d.cout, P);
      if (need_w) {
        im2col(gr.val(ix).data() + static_cast<std::int64_t>(n) * d.cin * d.h * d.w, d, cols.data());
        ConstMatMap cm(cols.data(), K, P);
        gw.noalias() += gom * cm.transpose();
      }
      if (need_x) {
        MatMap gcols(cols.data(), K, P);
        gcols.noalias() = wm.transpose() * gom;
        col2im_acc(cols.data(), d, gxt.data() + static_cast<std::int64_t>(n) * d.cin * d.h * d.w);
      }
    }
    if (need_x) gr.acc(ix, std::move(gxt));
    if (need_w) gr.acc(iw, std::move(gwt));
    if (ibias >= 0 && gr.needs_grad(ibias)) {
      Tensor gb(Shape{d.cout});
      for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.cout; ++c) {
          const real* o = go.data() + (static_cast<std::int64_t>(n) * d.cout + c) * P;
          real s = 0;
          for (std::int64_t i = 0; i < P; ++i) s += o[i];
          gb[c] += s;
        }
      gr.acc(ibias, std::move(gb));
    }
  });
}

Var conv2d(Var x, Var w, int stride, int pad_h, int pad_w) {
  return conv2d(x, w, Var(), stride, pad_h, pad_w);
}

Var avg_pool2(Var x) {
  Graph& g = x.graph();
  const Shape& s = x.val().shape();
  DASP_CHECK(s.size() >= 2, "avg_pool2 needs >=2 dims");
  const int H = s[s.size() - 2], W = s[s.size() - 1];
  DASP_CHECK(H % 2 == 0 && W % 2 == 0, "avg_pool2 needs even spatial dims, got " + shape_str(s));
  std::int64_t outer = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) outer *= s[i];
  Shape os = s;
  os[s.size() - 2] = H / 2;
  os[s.size() - 1] = W / 2;
  Tensor out(os);
  const Tensor& xv = x.val();
  for (std::int64_t o = 0; o < outer; ++o) {
    const real* xs = xv.data() + o * H * W;
    real* od = out.data() + o * (H / 2) * (W / 2);
    for (int i = 0; i < H / 2; ++i)
      for (int j = 0; j < W / 2; ++j)
        od[i * (W / 2) + j] = 0.25 * (xs[(2 * i) * W + 2 * j] + xs[(2 * i) * W + 2 * j + 1] +
                                      xs[(2 * i + 1) * W + 2 * j] + xs[(2 * i + 1) * W + 2 * j + 1]);
  }
  const int ix = x.id();
  return g.make(std::move(out), {ix}, [ix, outer, H, W](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ix).shape());
    for (std::int64_t o = 0; o < outer; ++o) {
      real* gs = gx.data() + o * H * W;
      const real* gd = go.data() + o * (H / 2) * (W / 2);
      for (int i = 0; i < H / 2; ++i)
        for (int j = 0; j < W / 2; ++j) {
          const real v = 0.25 * gd[i * (W / 2) + j];
          gs[(2 * i) * W + 2 * j] += v;
          gs[(2 * i) * W + 2 * j + 1] += v;
          gs[(2 * i + 1) * W + 2 * j] += v;
          gs[(2 * i + 1) * W + 2 * j + 1] += v;
        }
    }
    gr.acc(ix, std::move(gx));
  });
}

namespace {

// Sample positions for factor-2 bilinear upsampling (half-pixel centers).
struct UpTap {
  int i0, i1;
  real w0, w1;
};

std::vector<UpTap> up2_taps(int n_in) {
  std::vector<UpTap> taps(static_cast<size_t>(2 * n_in));
  for (int i = 0; i < 2 * n_in; ++i) {
    const real src = (i + 0.5) / 2.0 - 0.5;
    const int f = static_cast<int>(std::floor(src));
    const real frac = src - f;
    UpTap t;
    t.i0 = std::clamp(f, 0, n_in - 1);
    t.i1 = std::clamp(f + 1, 0, n_in - 1);
    t.w0 = 1.0 - frac;
    t.w1 = frac;
    taps[static_cast<size_t>(i)] = t;
  }
  return taps;
}

}  // namespace

Var bilinear_up2(Var x) {
  Graph& g = x.graph();
  const Shape& s = x.val().shape();
  DASP_CHECK(s.size() >= 2, "bilinear_up2 needs >=2 dims");
  const int H = s[s.size() - 2], W = s[s.size() - 1];
  std::int64_t outer = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) outer *= s[i];
  Shape os = s;
  os[s.size() - 2] = 2 * H;
  os[s.size() - 1] = 2 * W;
  const auto th = up2_taps(H);
  const auto tw = up2_taps(W);
  Tensor out(os);
  const Tensor& xv = x.val();
  for (std::int64_t o = 0; o < outer; ++o) {
    const real* xs = xv.data() + o * H * W;
    real* od = out.data() + o * 4 * H * W;
    for (int i = 0; i < 2 * H; ++i) {
      const UpTap& a = th[static_cast<size_t>(i)];
      for (int j = 0; j < 2 * W; ++j) {
        const UpTap& b = tw[static_cast<size_t>(j)];
        od[i * 2 * W + j] = a.w0 * (b.w0 * xs[a.i0 * W + b.i0] + b.w1 * xs[a.i0 * W + b.i1]) +
                            a.w1 * (b.w0 * xs[a.i1 * W + b.i0] + b.w1 * xs[a.i1 * W + b.i1]);
      }
    }
  }
  const int ix = x.id();
  return g.make(std::move(out), {ix}, [ix, outer, H, W, th, tw](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    Tensor gx(gr.val(ix).shape());
    for (std::int64_t o = 0; o < outer; ++o) {
      real* gs = gx.data() + o * H * W;
      const real* gd = go.data() + o * 4 * H * W;
      for (int i = 0; i < 2 * H; ++i) {
        const UpTap& a = th[static_cast<size_t>(i)];
        for (int j = 0; j < 2 * W; ++j) {
          const UpTap& b = tw[static_cast<size_t>(j)];
          const real v = gd[i * 2 * W + j];
          gs[a.i0 * W + b.i0] += a.w0 * b.w0 * v;
          gs[a.i0 * W + b.i1] += a.w0 * b.w1 * v;
          gs[a.i1 * W + b.i0] += a.w1 * b.w0 * v;
          gs[a.i1 * W + b.i1] += a.w1 * b.w1 * v;
        }
      }
    }
    gr.acc(ix, std::move(gx));
  });
}

Var bilinear_sample(Var image, Var coords) {
  Graph& g = shared_graph(image, coords);
  const Shape& is = image.val().shape();
  const Shape& cs = coords.val().shape();
  DASP_CHECK(is.size() == 3, "bilinear_sample expects image [C,H,W], got " + shape_str(is));
  DASP_CHECK(cs.size() == 3 && cs[0] == 2, "bilinear_sample expects coords [2,Ho,Wo], got " + shape_str(cs));
  DASP_CHECK(coords.val().all_finite(), "bilinear_sample: non-finite coordinates");
  const int C = is[0], H = is[1], W = is[2];
  const int Ho = cs[1], Wo = cs[2];
  const std::int64_t P = static_cast<std::int64_t>(Ho) * Wo;

  Tensor out(Shape{C, Ho, Wo});
  const Tensor& img = image.val();
  const Tensor& crd = coords.val();
  for (std::int64_t p = 0; p < P; ++p) {
    const real uc = std::clamp(crd[p], 0.0, static_cast<real>(W - 1));
    const real vc = std::clamp(crd[P + p], 0.0, static_cast<real>(H - 1));
    const int x0 = std::min(static_cast<int>(uc), W - 2 >= 0 ? W - 2 : 0);
    const int y0 = std::min(static_cast<int>(vc), H - 2 >= 0 ? H - 2 : 0);
    const int x1 = std::min(x0 + 1, W - 1);
    const int y1 = std::min(y0 + 1, H - 1);
    const real wx = uc - x0;
    const real wy = vc - y0;
    for (int c = 0; c < C; ++c) {
      const real* ip = img.data() + static_cast<std::int64_t>(c) * H * W;
      out[c * P + p] = (1 - wy) * ((1 - wx) * ip[y0 * W + x0] + wx * ip[y0 * W + x1]) +
                       wy * ((1 - wx) * ip[y1 * W + x0] + wx * ip[y1 * W + x1]);
    }
  }
  const int ii = image.id(), ic = coords.id();
  return g.make(std::move(out), {ii, ic}, [ii, ic, C, H, W, Ho, Wo, P](Graph& gr, int self) {
    const Tensor& go = gr.grad(self);
    const Tensor& img = gr.val(ii);
    const Tensor& crd = gr.val(ic);
    const bool need_img = gr.needs_grad(ii);
    const bool need_crd = gr.needs_grad(ic);
    Tensor gi, gc;
    if (need_img) gi = Tensor::zeros(img.shape());
    if (need_crd) gc = Tensor::zeros(crd.shape());
    for (std::int64_t p = 0; p < P; ++p) {
      const real u = crd[p];
      const real v = crd[P + p];
      const bool cu = u > 0.0 && u < static_cast<real>(W - 1);  // coord grad only off the clamp
      const bool cv = v > 0.0 && v < static_cast<real>(H - 1);
      const real uc = std::clamp(u, 0.0, static_cast<real>(W - 1));
      const real vc = std::clamp(v, 0.0, static_cast<real>(H - 1));
      const int x0 = std::min(static_cast<int>(uc), W - 2 >= 0 ? W - 2 : 0);
      const int y0 = std::min(static_cast<int>(vc), H - 2 >= 0 ? H - 2 : 0);
      const int x1 = std::min(x0 + 1, W - 1);
      const int y1 = std::min(y0 + 1, H - 1);
      const real wx = uc - x0;
      const real wy = vc - y0;
      real du = 0, dv = 0;
      for (int c = 0; c < C; ++c) {
        const real gv = go[c * P + p];
        const real* ip = img.data() + static_cast<std::int64_t>(c) * H * W;
        if (need_img) {
          real* gp = gi.data() + static_cast<std::int64_t>(c) * H * W;
          gp[y0 * W + x0] += gv * (1 - wy) * (1 - wx);
          gp[y0 * W + x1] += gv * (1 - wy) * wx;
          gp[y1 * W + x0] += gv * wy * (1 - wx);
          gp[y1 * W + x1] += gv * wy * wx;
        }
        if (need_crd) {
          du += gv * ((1 - wy) * (ip[y0 * W + x1] - ip[y0 * W + x0]) +
                      wy * (ip[y1 * W + x1] - ip[y1 * W + x0]));
          dv += gv * ((1 - wx) * (ip[y1 * W + x0] - ip[y0 * W + x0]) +
                      wx * (ip[y1 * W + x1] - ip[y0 * W + x1]));
        }
      }
      if (need_crd) {
        gc[p] = cu ? du : 0.0;
        gc[P + p] = cv ? dv : 0.0;
      }
    }
    if (need_img) gr.acc(ii, std::move(gi));
    if (need_crd) gr.acc(ic, std::move(gc));
  });
}

Tensor bilinear_inbounds_mask(const Tensor& coords, int img_h, int img_w) {
  const Shape& cs = coords.shape();
  DASP_CHECK(cs.size() == 3 && cs[0] == 2, "coords must be [2,Ho,Wo]");
  const std::int64_t P = static_cast<std::int64_t>(cs[1]) * cs[2];
  Tensor mask(Shape{cs[1], cs[2]});
  for (std::int64_t p = 0; p < P; ++p) {
    const real u = coords[p];
    const real v = coords[P + p];
    mask[p] = (u >= 0.0 && u <= img_w - 1.0 && v >= 0.0 && v <= img_h - 1.0) ? 1.0 : 0.0;
  }
  return mask;
}

}  // namespace dasp

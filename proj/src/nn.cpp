#include "dasp/nn.hpp"

#include <cmath>

namespace dasp {

namespace {

Tensor conv_init(Rng& rng, Init init, int cin, int cout, int kh, int kw) {
  Tensor w(Shape{cout, cin, kh, kw});
  if (init == Init::kZero) return w;
  if (init == Init::kIdentity) {
    DASP_CHECK(cin == cout, "identity init needs cin == cout");
    for (int c = 0; c < cout; ++c) w.at({c, c, kh / 2, kw / 2}) = 1.0;
    return w;
  }
  const real std = std::sqrt(2.0 / (cin * kh * kw));
  for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, std);
  return w;
}

}  // namespace

Conv2dLayer::Conv2dLayer(ParamStore& store, const std::string& name, int cin, int cout, int kh,
                         int kw, int stride, int pad_h, int pad_w, Rng& rng, Init init, bool bias)
    : store_(&store), stride_(stride), pad_h_(pad_h), pad_w_(pad_w) {
  w_ = store.add(name + ".w", conv_init(rng, init, cin, cout, kh, kw));
  if (bias) b_ = store.add(name + ".b", Tensor::zeros(Shape{cout}));
}

Var Conv2dLayer::operator()(Graph& g, Var x) const {
  Var w = g.param(*store_, w_);
  if (b_ < 0) return conv2d(x, w, stride_, pad_h_, pad_w_);
  return conv2d(x, w, g.param(*store_, b_), stride_, pad_h_, pad_w_);
}

LinearLayer::LinearLayer(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                         Init init)
    : store_(&store) {
  Tensor w(Shape{in, out});
  if (init == Init::kHeNormal) {
    const real std = std::sqrt(2.0 / in);
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, std);
  } else if (init == Init::kIdentity) {
    DASP_CHECK(in == out, "identity init needs square weight");
    for (int i = 0; i < in; ++i) w.at({i, i}) = 1.0;
  }
  w_ = store.add(name + ".w", std::move(w));
  b_ = store.add(name + ".b", Tensor::zeros(Shape{out}));
}

Var LinearLayer::operator()(Graph& g, Var x) const {
  DASP_CHECK(x.val().ndim() == 2, "linear expects [N,in], got " + shape_str(x.shape()));
  Var y = matmul(x, g.param(*store_, w_));
  return add(y, g.param(*store_, b_));
}

int effective_heads(int channels, int requested) {
  int h = std::min(channels, requested);
  while (h > 1 && channels % h != 0) --h;
  return h < 1 ? 1 : h;
}

AxialAttention::AxialAttention(ParamStore& store, const std::string& name, int channels, int heads,
                               Rng& rng, Init init)
    : store_(&store), channels_(channels), heads_(effective_heads(channels, heads)) {
  qkv_ = LinearLayer(store, name + ".qkv", channels, 3 * channels, rng, init);
  proj_ = LinearLayer(store, name + ".proj", channels, channels, rng, init);
}

Var AxialAttention::operator()(Graph& g, Var x, Var* attn_out) const {
  const Shape s = x.val().shape();
  DASP_CHECK(s.size() == 3 && s[1] == channels_,
             "axial attention expects [B,C,L] with C=" + std::to_string(channels_) + ", got " + shape_str(s));
  const int B = s[0], C = s[1], L = s[2];
  const int hd = C / heads_;

  Var rows = reshape(permute(x, {0, 2, 1}), {B * L, C});  // [B*L, C]
  Var qkv = qkv_(g, rows);                                // [B*L, 3C]
  auto heads_view = [&](Var t, int off) {
    Var part = slice(t, 1, off * C, C);                        // [B*L, C]
    part = reshape(part, {B, L, heads_, hd});                  // [B,L,h,hd]
    return reshape(permute(part, {0, 2, 1, 3}), {B * heads_, L, hd});
  };
  Var q = heads_view(qkv, 0);
  Var k = heads_view(qkv, 1);
  Var v = heads_view(qkv, 2);

  Var scores = matmul(q, permute(k, {0, 2, 1}));  // [B*h, L, L]
  scores = mul_scalar(scores, 1.0 / std::sqrt(static_cast<real>(hd)));
  Var attn = softmax_lastdim(scores);
  if (attn_out) *attn_out = attn;
  Var ctx = matmul(attn, v);  // [B*h, L, hd]
  ctx = reshape(ctx, {B, heads_, L, hd});
  ctx = reshape(permute(ctx, {0, 2, 1, 3}), {B * L, C});
  Var out = proj_(g, ctx);  // [B*L, C]
  return permute(reshape(out, {B, L, C}), {0, 2, 1});
}

void conv_set_identity(ParamStore& store, int weight_id) {
  ParamDef& d = store.def(weight_id);
  const Shape& s = d.value.shape();
  DASP_CHECK(s.size() == 4 && s[0] == s[1], "conv_set_identity needs square-channel conv weight");
  d.value = Tensor::zeros(s);
  for (int c = 0; c < s[0]; ++c) d.value.at({c, c, s[2] / 2, s[3] / 2}) = 1.0;
}

void zero_params_with_prefix(ParamStore& store, const std::string& prefix) {
  for (int id : store.ids_with_prefix(prefix)) {
    ParamDef& d = store.def(id);
    d.value = Tensor::zeros(d.value.shape());
  }
}

}  // namespace dasp

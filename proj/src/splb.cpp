#include "dasp/splb.hpp"

#include <cmath>

namespace dasp::splb {

void SPLBConfig::validate() const {
  DASP_CHECK(channels > 0 && channels % 2 == 0, "SPLB channels must be even and positive");
  DASP_CHECK(time_steps >= 2, "SPLB needs at least two frames");
  DASP_CHECK(compression >= 1, "compression factor must be >= 1");
  DASP_CHECK(channels / 2 / compression >= 1, "C/(2r) must be >= 1");
  DASP_CHECK(channels / 2 % compression == 0, "compression must divide C/2");
  DASP_CHECK(pool_factor == 2, "only pool factor 2 is supported");
  DASP_CHECK(attention_heads >= 1, "attention heads must be >= 1");
}

Var fold_time(Var x) {
  const Shape s = x.val().shape();
  DASP_CHECK(s.size() == 5, "fold_time expects [B,T,C,H,W]");
  return reshape(x, {s[0] * s[1], s[2], s[3], s[4]});
}

Var unfold_time(Var x, int batch, int time_steps) {
  const Shape s = x.val().shape();
  DASP_CHECK(s.size() == 4 && s[0] == batch * time_steps, "unfold_time shape mismatch");
  return reshape(x, {batch, time_steps, s[1], s[2], s[3]});
}

Var attend_width(Graph& g, const AxialAttention& attn, Var x) {
  const Shape s = x.val().shape();  // [N,C,H,W]; copied, ops below may realloc nodes
  Var rows = reshape(permute(x, {0, 2, 1, 3}), {s[0] * s[2], s[1], s[3]});
  Var out = attn(g, rows);
  return permute(reshape(out, {s[0], s[2], s[1], s[3]}), {0, 2, 1, 3});
}

Var attend_height(Graph& g, const AxialAttention& attn, Var x) {
  const Shape s = x.val().shape();  // copied
  Var cols = reshape(permute(x, {0, 3, 1, 2}), {s[0] * s[3], s[1], s[2]});
  Var out = attn(g, cols);
  return permute(reshape(out, {s[0], s[3], s[1], s[2]}), {0, 2, 3, 1});
}

// ------------------------------------------------------------------
// STLM
// ------------------------------------------------------------------

STLM::STLM(ParamStore& store, const std::string& name, const SPLBConfig& cfg, Rng& rng)
    : store_(&store), cfg_(cfg) {
  cfg.validate();
  const int c2 = cfg.channels / 2;
  const int cr = c2 / cfg.compression;
  compress_ = Conv2dLayer(store, name + ".compress", c2, cr, 1, 1, 1, 0, 0, rng);
  diff_ = Conv2dLayer(store, name + ".diff", cr, cr, 3, 3, 1, 1, 1, rng);
  const int heads = effective_heads(cr, cfg.attention_heads);
  width_.local = Conv2dLayer(store, name + ".w_local", cr, cr, 3, 1, 1, 1, 0, rng);
  width_.attn = AxialAttention(store, name + ".w_attn", cr, heads, rng);
  width_.refine = Conv2dLayer(store, name + ".w_refine", cr, cr, 1, 3, 1, 0, 1, rng);
  width_.along_width = true;
  height_.local = Conv2dLayer(store, name + ".h_local", cr, cr, 1, 3, 1, 0, 1, rng);
  height_.attn = AxialAttention(store, name + ".h_attn", cr, heads, rng);
  height_.refine = Conv2dLayer(store, name + ".h_refine", cr, cr, 3, 1, 1, 1, 0, rng);
  height_.along_width = false;
  expand_ = Conv2dLayer(store, name + ".expand", cr, c2, 1, 1, 1, 0, 0, rng);
}

Var STLM::refine_axis(Graph& g, Var f, const AxisBranch& br) const {
  Var local = sigmoid(bilinear_up2(br.local(g, avg_pool2(f))));
  Var attn = br.along_width ? attend_width(g, br.attn, f) : attend_height(g, br.attn, f);
  Var multiscale = mul(local, add(f, attn));
  return sigmoid(br.refine(g, multiscale));
}

Var STLM::operator()(Graph& g, Var x, Trace* trace) const {
  const Shape& s = x.val().shape();
  DASP_CHECK(s.size() == 5, "STLM expects [B,T,C/2,H,W]");
  const int B = s[0], T = s[1], C2 = s[2], H = s[3], W = s[4];
  DASP_CHECK(T == cfg_.time_steps, "STLM time steps mismatch");
  DASP_CHECK(T >= 2, "STLM needs at least two frames");
  DASP_CHECK(C2 == cfg_.channels / 2, "STLM channel mismatch");
  DASP_CHECK(H % 2 == 0 && W % 2 == 0 && H >= cfg_.pool_factor && W >= cfg_.pool_factor,
             "STLM spatial dims must be even and >= pool factor");
  const int cr = C2 / cfg_.compression;

  Var xc = unfold_time(compress_(g, fold_time(x)), B, T);  // [B,T,Cr,H,W]

  // Directional differences along time: conv(x_{t+1}) - x_t, restored to
  // length T with a zero frame at the end.
  Var next = reshape(slice(xc, 1, 1, T - 1), {B * (T - 1), cr, H, W});
  Var prev = reshape(slice(xc, 1, 0, T - 1), {B * (T - 1), cr, H, W});
  Var diffs = unfold_time(sub(diff_(g, next), prev), B, T - 1);
  diffs = pad_zero(diffs, 1, 0, 1);  // [B,T,Cr,H,W]
  if (trace) trace->diffs = diffs;

  Var f = fold_time(diffs);  // [B*T,Cr,H,W]
  Var refined = add(refine_axis(g, f, width_), refine_axis(g, f, height_));
  Var gate = unfold_time(expand_(g, refined), B, T);  // [B,T,C/2,H,W]
  if (trace) trace->gate = gate;
  return mul(gate, x);
}

// ------------------------------------------------------------------
// ASLM
// ------------------------------------------------------------------

ASLM::ASLM(ParamStore& store, const std::string& name, const SPLBConfig& cfg, Rng& rng)
    : store_(&store), cfg_(cfg) {
  cfg.validate();
  const int c2 = cfg.channels / 2;
  const int heads = effective_heads(c2, cfg.attention_heads);
  attn_h_ = AxialAttention(store, name + ".attn_h", c2, heads, rng);
  attn_w_ = AxialAttention(store, name + ".attn_w", c2, heads, rng);
  local_a_ = Conv2dLayer(store, name + ".local_a", c2, c2, 1, 3, 1, 0, 1, rng);
  local_b_ = Conv2dLayer(store, name + ".local_b", c2, c2, 3, 1, 1, 1, 0, rng);
  dire_w_ = Conv2dLayer(store, name + ".dire_w", c2, c2, 3, 1, 1, 1, 0, rng);
  dire_h_ = Conv2dLayer(store, name + ".dire_h", c2, c2, 1, 3, 1, 0, 1, rng);
  refine_ = Conv2dLayer(store, name + ".refine", c2, c2, 3, 3, 1, 1, 1, rng);
}

Var ASLM::operator()(Graph& g, Var x, Trace* trace) const {
  const Shape& s = x.val().shape();
  DASP_CHECK(s.size() == 5, "ASLM expects [B,T,C/2,H,W]");
  const int B = s[0], T = s[1], C2 = s[2], H = s[3], W = s[4];
  DASP_CHECK(C2 == cfg_.channels / 2, "ASLM channel mismatch");
  DASP_CHECK(H >= cfg_.pool_factor && W >= cfg_.pool_factor,
             "ASLM spatial dims smaller than pool factor");
  DASP_CHECK(H % 2 == 0 && W % 2 == 0, "ASLM spatial dims must be even");

  Var xf = fold_time(x);  // [B*T,C/2,H,W]
  Var f_global = attend_width(g, attn_w_, attend_height(g, attn_h_, xf));
  Var f_local = sigmoid(bilinear_up2(local_b_(g, local_a_(g, avg_pool2(xf)))));
  Var f_inte = mul(f_local, add(f_global, xf));

  Var gmp_w = max_axis(f_inte, 3, true);  // [*,C/2,H,1]
  Var gmp_h = max_axis(f_inte, 2, true);  // [*,C/2,1,W]
  Var f_dire = add(sigmoid(dire_w_(g, gmp_w)), sigmoid(dire_h_(g, gmp_h)));  // broadcast to [*,C/2,H,W]
  Var f_s = mul(refine_(g, f_inte), f_dire);

  if (trace) {
    trace->f_global = f_global;
    trace->f_local = f_local;
    trace->f_inte = f_inte;
    trace->f_dire = f_dire;
    trace->gmp_h_profile = gmp_h;
  }
  return unfold_time(f_s, B, T);
}

// ------------------------------------------------------------------
// SPLB
// ------------------------------------------------------------------

SPLB::SPLB(ParamStore& store, const std::string& name, const SPLBConfig& cfg, Rng& rng)
    : store_(&store), cfg_(cfg) {
  cfg.validate();
  const int c2 = cfg.channels / 2;
  if (cfg.use_stlm) {
    stlm_ = STLM(store, name + ".stlm", cfg, rng);
  } else {
    plain_t_ = Conv2dLayer(store, name + ".plain_t", c2, c2, 3, 3, 1, 1, 1, rng);
  }
  if (cfg.use_aslm) {
    aslm_ = ASLM(store, name + ".aslm", cfg, rng);
  } else {
    plain_s_ = Conv2dLayer(store, name + ".plain_s", c2, c2, 3, 3, 1, 1, 1, rng);
  }
  fuse_ = Conv2dLayer(store, name + ".fuse", c2, c2, 3, 3, 1, 1, 1, rng);
}

Var SPLB::operator()(Graph& g, Var x) const {
  const Shape& s = x.val().shape();
  DASP_CHECK(s.size() == 5, "SPLB expects [B,T,C,H,W]");
  DASP_CHECK(s[2] == cfg_.channels, "SPLB channel mismatch");
  DASP_CHECK(s[2] % 2 == 0, "SPLB needs an even channel count");
  const int B = s[0], T = s[1], c2 = s[2] / 2;

  Var x_t = slice(x, 2, 0, c2);
  Var x_s = slice(x, 2, c2, c2);
  Var f_t = cfg_.use_stlm ? stlm_(g, x_t) : unfold_time(plain_t_(g, fold_time(x_t)), B, T);
  Var f_s = cfg_.use_aslm ? aslm_(g, x_s) : unfold_time(plain_s_(g, fold_time(x_s)), B, T);

  Var y_inte = unfold_time(fuse_(g, fold_time(add(f_t, f_s))), B, T);
  Var y = concat({add(f_t, y_inte), add(f_s, y_inte)}, 2);
  return add(y, x);
}

// ------------------------------------------------------------------
// Discriminator
// ------------------------------------------------------------------

void DiscriminatorConfig::validate() const {
  DASP_CHECK(stem_channels >= 2 && stem_channels % 2 == 0, "stem channels must be even");
  DASP_CHECK(num_blocks >= 1, "discriminator needs at least one block");
  DASP_CHECK(time_steps >= 2, "discriminator needs sequences of >= 2 frames");
}

Discriminator::Discriminator(ParamStore& store, const std::string& name,
                             const DiscriminatorConfig& cfg, Rng& rng)
    : store_(&store), cfg_(cfg) {
  cfg.validate();
  stem_ = Conv2dLayer(store, name + ".stem", 1, cfg.stem_channels, 3, 3, 2, 1, 1, rng);
  int ch = cfg.stem_channels;
  for (int b = 0; b < cfg.num_blocks; ++b) {
    SPLBConfig bc;
    bc.channels = ch;
    bc.time_steps = cfg.time_steps;
    bc.compression = std::min(cfg.compression, ch / 2);
    bc.attention_heads = cfg.attention_heads;
    bc.use_stlm = cfg.use_stlm;
    bc.use_aslm = cfg.use_aslm;
    blocks_.emplace_back(store, name + ".b" + std::to_string(b), bc, rng);
    if (b + 1 < cfg.num_blocks) {
      downs_.emplace_back(store, name + ".down" + std::to_string(b), ch, 2 * ch, 3, 3, 2, 1, 1,
                          rng);
      ch *= 2;
    }
  }
  head_ = LinearLayer(store, name + ".head", ch, 1, rng);
}

Var Discriminator::operator()(Graph& g, Var sequences) const {
  const Shape& s = sequences.val().shape();
  DASP_CHECK(s.size() == 5 && s[2] == 1, "discriminator expects [B,T,1,H,W]");
  DASP_CHECK(s[1] == cfg_.time_steps, "discriminator time steps mismatch");
  const int down_total = 1 << cfg_.num_blocks;  // stem plus the stage transitions
  DASP_CHECK(s[3] % down_total == 0 && s[4] % down_total == 0,
             "discriminator input resolution must be divisible by 2^" +
                 std::to_string(cfg_.num_blocks));
  const int B = s[0], T = s[1];

  Var h = unfold_time(stem_(g, fold_time(sequences)), B, T);
  for (size_t b = 0; b < blocks_.size(); ++b) {
    h = blocks_[b](g, h);
    if (b < downs_.size()) h = unfold_time(downs_[b](g, fold_time(h)), B, T);
  }
  // Global average pool over T, H, W then project to one raw score.
  const Shape hs = h.val().shape();
  Var pooled = mean_axis(reshape(permute(h, {0, 2, 1, 3, 4}), {hs[0], hs[2], hs[1] * hs[3] * hs[4]}),
                         2, false);  // [B,C]
  return reshape(head_(g, pooled), {B});
}

Var normalize_disparity_sequence(Graph& g, Var x) {
  const Shape& s = x.val().shape();
  DASP_CHECK(s.size() == 5 && s[2] == 1, "expected [B,T,1,H,W] disparity sequence");
  const int B = s[0], T = s[1], H = s[3], W = s[4];
  Var flat = reshape(x, {B * T, H * W});
  Var mx = max_axis(flat, 1, true);                 // [B*T,1]
  Var mn = neg(max_axis(neg(flat), 1, true));       // [B*T,1]
  Var range = clamp_min(sub(mx, mn), 1e-8);
  Var normed = div(sub(flat, mn), range);
  return reshape(normed, {B, T, 1, H, W});
}

}  // namespace dasp::splb

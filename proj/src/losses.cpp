#include "dasp/losses.hpp"

#include <cmath>
#include <sstream>

namespace dasp::losses {

namespace {

constexpr real kSsimC1 = 0.01 * 0.01;
constexpr real kSsimC2 = 0.03 * 0.03;
constexpr real kDivGuard = 1e-7;
constexpr real kNormEps = 1e-12;

// 3x3 box filter with replicate padding on [C,H,W].
Var box3(Graph& g, Var x) {
  const Shape s = x.val().shape();
  const int H = s[s.size() - 2], W = s[s.size() - 1];
  Var p = pad_replicate2d(x, 1);
  Var acc;
  for (int dy = 0; dy < 3; ++dy)
    for (int dx = 0; dx < 3; ++dx) {
      Var sl = slice(slice(p, -2, dy, H), -1, dx, W);
      acc = acc.valid() ? add(acc, sl) : sl;
    }
  return mul_scalar(acc, 1.0 / 9.0);
}

void check_unit_range(const Tensor& t, const char* what) {
  DASP_CHECK(t.min() >= -1e-9 && t.max() <= 1.0 + 1e-9,
             std::string(what) + " values must lie in [0,1]");
}

}  // namespace

void LossWeights::validate() const {
  DASP_CHECK(alpha >= 0 && alpha <= 1, "alpha must be in [0,1]");
  DASP_CHECK(lambda1 >= 0 && lambda2 >= 0 && lambda3 >= 0 && lambda4 >= 0,
             "loss weights must be nonnegative");
}

std::string LossReport::to_log_line(int step, real lr) const {
  std::ostringstream os;
  os.precision(10);
  os << "step=" << step << " lr=" << lr << " photometric=" << photometric
     << " smoothness=" << smoothness << " geom=" << geom_consistency;
  if (projection_enabled) os << " proj=" << projection;
  os << " self_total=" << self_total << " gan_g=" << gan_generator
     << " gan_d=" << gan_discriminator << " total=" << total << " mask_mean=" << mask_mean
     << " validity_mean=" << validity_mean << " degenerate=" << (degenerate ? 1 : 0);
  return os.str();
}

MaskedMean masked_mean(Graph& g, Var x, const Tensor& mask) {
  DASP_CHECK(x.val().same_shape(mask), "masked_mean shape mismatch");
  const real count = mask.sum();
  MaskedMean out;
  if (count <= 0) {
    out.value = g.scalar(0.0);
    out.degenerate = true;
    return out;
  }
  out.value = mul_scalar(sum_all(mul(x, g.constant(mask))), 1.0 / count);
  return out;
}

Var ssim_map(Graph& g, Var a, Var b) {
  DASP_CHECK(a.val().same_shape(b.val()), "ssim: shape mismatch");
  DASP_CHECK(a.val().ndim() == 3, "ssim expects [C,H,W]");
  Var mu_a = box3(g, a);
  Var mu_b = box3(g, b);
  Var var_a = sub(box3(g, mul(a, a)), mul(mu_a, mu_a));
  Var var_b = sub(box3(g, mul(b, b)), mul(mu_b, mu_b));
  Var cov = sub(box3(g, mul(a, b)), mul(mu_a, mu_b));
  Var num = mul(add_scalar(mul_scalar(mul(mu_a, mu_b), 2.0), kSsimC1),
                add_scalar(mul_scalar(cov, 2.0), kSsimC2));
  Var den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), kSsimC1),
                add_scalar(add(var_a, var_b), kSsimC2));
  return mean_axis(div(num, den), 0, false);  // [H,W]
}

Photometric photometric_loss(Graph& g, Var target, Var warped, real alpha) {
  DASP_CHECK(target.val().same_shape(warped.val()), "photometric: shape mismatch");
  DASP_CHECK(alpha >= 0 && alpha <= 1, "photometric: alpha must be in [0,1]");
  check_unit_range(target.val(), "target");
  check_unit_range(warped.val(), "warped");
  Var l1 = mean_axis(vabs(sub(target, warped)), 0, false);  // [H,W]
  Photometric out;
  if (alpha == 0.0) {
    out.per_pixel = l1;
  } else {
    Var ssim_term = mul_scalar(add_scalar(neg(ssim_map(g, target, warped)), 1.0), alpha / 2.0);
    out.per_pixel = add(ssim_term, mul_scalar(l1, 1.0 - alpha));
  }
  out.mean = mean_all(out.per_pixel);
  return out;
}

Var smoothness_loss(Graph& g, Var disparity, Var image) {
  const Shape ds = disparity.val().shape();
  DASP_CHECK(ds.size() == 2, "smoothness expects disparity [H,W]");
  const Shape& is = image.val().shape();
  DASP_CHECK(is.size() == 3 && is[1] == ds[0] && is[2] == ds[1],
             "smoothness: image [C,H,W] must match disparity");
  const int H = ds[0], W = ds[1];

  Var norm = div(disparity, mean_all(disparity));
  Var dx = vabs(sub(slice(norm, 1, 1, W - 1), slice(norm, 1, 0, W - 1)));
  Var dy = vabs(sub(slice(norm, 0, 1, H - 1), slice(norm, 0, 0, H - 1)));

  Var ix = mean_axis(vabs(sub(slice(image, 2, 1, W - 1), slice(image, 2, 0, W - 1))), 0, false);
  Var iy = mean_axis(vabs(sub(slice(image, 1, 1, H - 1), slice(image, 1, 0, H - 1))), 0, false);

  Var term_x = mean_all(mul(dx, vexp(neg(ix))));
  Var term_y = mean_all(mul(dy, vexp(neg(iy))));
  return add(term_x, term_y);
}

GeomConsistency geometric_consistency(Graph& g, Var depth_t_projected, Var depth_s_warped,
                                      const Tensor& validity) {
  Var proj = depth_t_projected;
  Var sampled = depth_s_warped;
  if (proj.val().ndim() == 3) proj = reshape(proj, {proj.dim(1), proj.dim(2)});
  if (sampled.val().ndim() == 3) sampled = reshape(sampled, {sampled.dim(1), sampled.dim(2)});
  DASP_CHECK(proj.val().same_shape(sampled.val()), "geometric_consistency: shape mismatch");
  DASP_CHECK(proj.val().same_shape(validity), "geometric_consistency: validity shape mismatch");

  Var denom = add(proj, sampled);
  Tensor valid = validity;
  const Tensor& dv = denom.val();
  for (std::int64_t i = 0; i < dv.numel(); ++i) {
    if (dv[i] < kDivGuard) valid[i] = 0.0;
  }
  GeomConsistency out;
  out.d_diff = div(vabs(sub(proj, sampled)), clamp_min(denom, kDivGuard));
  out.mask = add_scalar(neg(out.d_diff), 1.0);
  MaskedMean mm = masked_mean(g, out.d_diff, valid);
  out.loss = mm.value;
  out.degenerate = mm.degenerate;
  out.valid = std::move(valid);
  return out;
}

MaskedMean projection_consistency_loss(Graph& g, Var residuals, const Tensor& validity) {
  const Shape& s = residuals.val().shape();
  DASP_CHECK(s.size() == 3 && s[0] == 3, "residuals must be [3,H,W]");
  // Shifted norm keeps the gradient finite at exactly-zero residuals while
  // leaving the value untouched at machine precision.
  Var sq = sum_axis(square(residuals), 0, false);  // [H,W]
  Var norm = add_scalar(vsqrt(add_scalar(sq, kNormEps * kNormEps)), -kNormEps);
  return masked_mean(g, norm, validity);
}

Var self_supervised_total(Graph& g, Var photometric_map, Var mask_ms, Var smoothness, Var geom,
                          Var proj, const Tensor& validity, const LossWeights& w) {
  w.validate();
  MaskedMean p = masked_mean(g, mul(photometric_map, mask_ms), validity);
  Var out = mul_scalar(p.value, w.lambda1);
  out = add(out, mul_scalar(smoothness, w.lambda2));
  out = add(out, mul_scalar(geom, w.lambda3));
  out = add(out, mul_scalar(proj, w.lambda4));
  return out;
}

Var lsgan_discriminator_loss(Var day_scores, Var night_scores) {
  DASP_CHECK(day_scores.val().numel() > 0 && night_scores.val().numel() > 0,
             "lsgan: empty score batch");
  Var day_term = mean_all(square(add_scalar(day_scores, -1.0)));
  Var night_term = mean_all(square(night_scores));
  return mul_scalar(add(day_term, night_term), 0.5);
}

Var lsgan_generator_loss(Var night_scores) {
  DASP_CHECK(night_scores.val().numel() > 0, "lsgan: empty score batch");
  return mul_scalar(mean_all(square(add_scalar(night_scores, -1.0))), 0.5);
}

Var total_loss(Var self_total, Var generator, Var discriminator) {
  return add(add(self_total, generator), discriminator);
}

}  // namespace dasp::losses

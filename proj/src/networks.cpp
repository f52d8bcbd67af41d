#include "dasp/networks.hpp"

namespace dasp::networks {

void DepthNetConfig::validate() const {
  DASP_CHECK(min_depth > 0 && min_depth < max_depth, "depth bounds must satisfy 0 < min < max");
  DASP_CHECK(encoder_widths.size() >= 2, "need at least two encoder stages");
  for (size_t i = 1; i < encoder_widths.size(); ++i)
    DASP_CHECK(encoder_widths[i] > encoder_widths[i - 1], "encoder widths must strictly increase");
}

void PoseNetConfig::validate() const {
  DASP_CHECK(encoder_widths.size() >= 2, "need at least two encoder stages");
  DASP_CHECK(translation_scale > 0, "translation scale must be positive");
}

Var disparity_to_depth(Var disparity, real min_depth, real max_depth) {
  const real a = 1.0 / min_depth - 1.0 / max_depth;
  const real b = 1.0 / max_depth;
  Var denom = add_scalar(mul_scalar(disparity, a), b);
  return div(disparity.graph().constant(Tensor::ones(disparity.shape())), denom);
}

DepthNet::DepthNet(ParamStore& store, const std::string& name, const DepthNetConfig& cfg, Rng& rng)
    : store_(&store), cfg_(cfg) {
  cfg.validate();
  int cin = 3;
  for (size_t i = 0; i < cfg.encoder_widths.size(); ++i) {
    enc_.emplace_back(store, name + ".enc" + std::to_string(i), cin, cfg.encoder_widths[i], 3, 3,
                      2, 1, 1, rng);
    cin = cfg.encoder_widths[i];
  }
  // decoder: upsample, concat the matching encoder feature, convolve
  const int n = static_cast<int>(cfg.encoder_widths.size());
  int ch = cfg.encoder_widths[static_cast<size_t>(n - 1)];
  for (int i = n - 2; i >= 0; --i) {
    const int skip = cfg.encoder_widths[static_cast<size_t>(i)];
    const int out = skip;
    dec_.emplace_back(store, name + ".dec" + std::to_string(i), ch + skip, out, 3, 3, 1, 1, 1,
                      rng);
    ch = out;
  }
  dec_.emplace_back(store, name + ".dec_full", ch, ch, 3, 3, 1, 1, 1, rng);
  disp_head_ = Conv2dLayer(store, name + ".disp", ch, 1, 3, 3, 1, 1, 1, rng);
}

DepthNet::Output DepthNet::operator()(Graph& g, Var image) const {
  const Shape s = image.val().shape();
  DASP_CHECK(s.size() == 3 && s[0] == 3, "depth net expects [3,H,W]");
  const int H = s[1], W = s[2];
  const int factor = 1 << static_cast<int>(enc_.size());
  DASP_CHECK(H % factor == 0 && W % factor == 0,
             "image resolution must be divisible by " + std::to_string(factor));

  Var h = reshape(image, {1, 3, H, W});
  std::vector<Var> skips;
  for (const auto& layer : enc_) {
    h = elu(layer(g, h));
    skips.push_back(h);
  }
  size_t d = 0;
  for (int i = static_cast<int>(enc_.size()) - 2; i >= 0; --i, ++d) {
    h = bilinear_up2(h);
    h = elu(dec_[d](g, concat({h, skips[static_cast<size_t>(i)]}, 1)));
  }
  h = elu(dec_[d](g, bilinear_up2(h)));

  Var disp = reshape(sigmoid(disp_head_(g, h)), {H, W});
  Output out;
  out.disparity = disp;
  out.depth = disparity_to_depth(disp, cfg_.min_depth, cfg_.max_depth);
  return out;
}

PoseNet::PoseNet(ParamStore& store, const std::string& name, const PoseNetConfig& cfg, Rng& rng)
    : store_(&store), cfg_(cfg) {
  cfg.validate();
  // Input: both frames plus their difference. The difference channels flip
  // sign when the motion direction flips, which keeps the gradients of the
  // forward and backward source pairs from cancelling through the shared
  // head.
  int cin = 9;
  for (size_t i = 0; i < cfg.encoder_widths.size(); ++i) {
    enc_.emplace_back(store, name + ".enc" + std::to_string(i), cin, cfg.encoder_widths[i], 3, 3,
                      2, 1, 1, rng);
    cin = cfg.encoder_widths[i];
  }
  head_ = LinearLayer(store, name + ".head", cin, 6, rng, Init::kZero);
}

Var PoseNet::operator()(Graph& g, Var frame_t, Var frame_s) const {
  const Shape s = frame_t.val().shape();
  DASP_CHECK(s.size() == 3 && s[0] == 3, "pose net expects [3,H,W] frames");
  DASP_CHECK(frame_t.val().same_shape(frame_s.val()), "pose net frames must match");
  const int H = s[1], W = s[2];
  const int factor = 1 << static_cast<int>(enc_.size());
  DASP_CHECK(H % factor == 0 && W % factor == 0,
             "image resolution must be divisible by " + std::to_string(factor));

  Var h = reshape(concat({frame_t, frame_s, sub(frame_t, frame_s)}, 0), {1, 9, H, W});
  for (const auto& layer : enc_) h = elu(layer(g, h));
  const Shape hs = h.val().shape();
  Var pooled = mean_axis(reshape(h, {hs[1], hs[2] * hs[3]}), 1, false);  // [C]
  Var raw = reshape(head_(g, reshape(pooled, {1, hs[1]})), {6});
  Var rot = slice(raw, 0, 0, 3);
  Var tr = mul_scalar(slice(raw, 0, 3, 3), cfg_.translation_scale);
  return concat({rot, tr}, 0);
}

}  // namespace dasp::networks

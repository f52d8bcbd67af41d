#pragma once

#include <string>

#include "dasp/graph.hpp"

namespace dasp::losses {

struct LossWeights {
  real alpha = 0.85;  // SSIM / L1 mix
  real lambda1 = 0.7;
  real lambda2 = 0.1;
  real lambda3 = 0.5;
  real lambda4 = 0.5;

  void validate() const;
};

/// Per-step scalar record of every training objective plus the masks used.
struct LossReport {
  real photometric = 0;  // mean of the M_s-masked per-pixel map
  real smoothness = 0;
  real geom_consistency = 0;
  real projection = 0;
  real self_total = 0;
  real gan_generator = 0;
  real gan_discriminator = 0;
  real total = 0;
  real mask_mean = 1.0;      // mean of M_s over valid pixels
  real validity_mean = 1.0;  // fraction of pixels that survived masking
  bool degenerate = false;   // a masked reduction saw an empty mask
  bool projection_enabled = true;  // when off, the proj term is absent from logs

  std::string to_log_line(int step, real lr) const;
};

/// Masked mean: sum(x * mask) / sum(mask). Degenerate (all-zero) masks give a
/// constant 0 and set the flag.
struct MaskedMean {
  Var value;
  bool degenerate = false;
};
MaskedMean masked_mean(Graph& g, Var x, const Tensor& mask);

/// Mean-over-channels SSIM map, 3x3 box-filter statistics with replicate
/// padding, C1 = 0.01^2, C2 = 0.03^2. Inputs [C,H,W]; output [H,W].
Var ssim_map(Graph& g, Var a, Var b);

struct Photometric {
  Var per_pixel;  // [H,W]
  Var mean;       // scalar (unmasked mean)
};
/// alpha * (1 - SSIM)/2 + (1 - alpha) * |target - warped|, channel-averaged.
/// Inputs must lie in [0,1].
Photometric photometric_loss(Graph& g, Var target, Var warped, real alpha);

/// Edge-aware smoothness on mean-normalized disparity. disparity [H,W],
/// image [C,H,W].
Var smoothness_loss(Graph& g, Var disparity, Var image);

struct GeomConsistency {
  Var loss;       // scalar over valid pixels
  Var d_diff;     // [H,W] in [0,1)
  Var mask;       // M_s = 1 - d_diff
  Tensor valid;   // input validity minus division-guarded pixels
  bool degenerate = false;
};
/// depth_t_projected, depth_s_warped: [H,W] (or [1,H,W]); validity [H,W].
GeomConsistency geometric_consistency(Graph& g, Var depth_t_projected, Var depth_s_warped,
                                      const Tensor& validity);

/// Mean Euclidean norm of 3-d residuals [3,H,W] over valid pixels.
MaskedMean projection_consistency_loss(Graph& g, Var residuals, const Tensor& validity);

/// Eq-style weighted combination; photometric map is masked by M_s before the
/// mean.
Var self_supervised_total(Graph& g, Var photometric_map, Var mask_ms, Var smoothness, Var geom,
                          Var proj, const Tensor& validity, const LossWeights& w);

/// (1/2Nd) sum (s_d - 1)^2 + (1/2Nn) sum s_n^2, per-batch counts.
Var lsgan_discriminator_loss(Var day_scores, Var night_scores);
/// (1/2Nn) sum (s_n - 1)^2.
Var lsgan_generator_loss(Var night_scores);

/// Plain sum of the three objectives (parameter routing is the trainer's job).
Var total_loss(Var self_total, Var generator, Var discriminator);

}  // namespace dasp::losses

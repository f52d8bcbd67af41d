#pragma once

#include <string>
#include <vector>

#include "dasp/nn.hpp"

namespace dasp::networks {

struct DepthNetConfig {
  std::vector<int> encoder_widths = {16, 32, 64, 128};
  real min_depth = 0.1;
  real max_depth = 100.0;

  void validate() const;
};

struct PoseNetConfig {
  std::vector<int> encoder_widths = {16, 32, 64, 64};
  real translation_scale = 0.01;  // applied to the raw translation output

  void validate() const;
};

/// sigma in (0,1) -> depth via 1 / ((1/min - 1/max) sigma + 1/max).
Var disparity_to_depth(Var disparity, real min_depth, real max_depth);

/// Strided conv encoder with a skip-connected upsampling decoder; sigmoid
/// disparity head. Stands in for the Monodepth2 generator at desk scale.
class DepthNet {
 public:
  struct Output {
    Var disparity;  // [H,W], in (0,1)
    Var depth;      // [H,W], in (min_depth, max_depth)
  };

  DepthNet() = default;
  DepthNet(ParamStore& store, const std::string& name, const DepthNetConfig& cfg, Rng& rng);

  Output operator()(Graph& g, Var image) const;  // image [3,H,W]
  const DepthNetConfig& config() const { return cfg_; }

 private:
  ParamStore* store_ = nullptr;
  DepthNetConfig cfg_;
  std::vector<Conv2dLayer> enc_;
  std::vector<Conv2dLayer> dec_;
  Conv2dLayer disp_head_;
};

/// Two frames in, axis-angle + translation out. The final layer is
/// zero-initialized so the net starts at the identity pose.
class PoseNet {
 public:
  PoseNet() = default;
  PoseNet(ParamStore& store, const std::string& name, const PoseNetConfig& cfg, Rng& rng);

  Var operator()(Graph& g, Var frame_t, Var frame_s) const;  // -> [6]
  const PoseNetConfig& config() const { return cfg_; }

 private:
  ParamStore* store_ = nullptr;
  PoseNetConfig cfg_;
  std::vector<Conv2dLayer> enc_;
  LinearLayer head_;
};

}  // namespace dasp::networks

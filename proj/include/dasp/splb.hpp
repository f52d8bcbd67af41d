#pragma once

#include <string>

#include "dasp/nn.hpp"

namespace dasp::splb {

struct SPLBConfig {
  int channels = 16;      // C; the block splits it into two C/2 halves
  int time_steps = 3;     // T
  int compression = 4;    // r; STLM works on C/(2r) channels
  int attention_heads = 4;
  int pool_factor = 2;    // Down/Up factor (only 2 is supported)
  bool use_stlm = true;   // ablation toggles; a disabled branch degrades to a
  bool use_aslm = true;   // plain 3x3 convolution on its half

  void validate() const;
};

/// Spatial-based temporal learning module. Input/output [B,T,C/2,H,W].
class STLM {
 public:
  struct Trace {
    Var diffs;  // [B,T,Cr,H,W] inter-frame difference features (zero-padded)
    Var gate;   // [B,T,C/2,H,W] multiplicative gate applied to the input
  };

  STLM() = default;
  STLM(ParamStore& store, const std::string& name, const SPLBConfig& cfg, Rng& rng);

  Var operator()(Graph& g, Var x, Trace* trace = nullptr) const;

 private:
  struct AxisBranch {
    Conv2dLayer local;   // asymmetric conv inside the sigmoid gate
    AxialAttention attn;
    Conv2dLayer refine;  // asymmetric conv producing the sigmoid-refined map
    bool along_width = true;
  };
  Var refine_axis(Graph& g, Var f, const AxisBranch& br) const;

  ParamStore* store_ = nullptr;
  SPLBConfig cfg_;
  Conv2dLayer compress_;  // 1x1, C/2 -> Cr
  Conv2dLayer diff_;      // 3x3, Cr -> Cr, applied to the t+1 frame
  AxisBranch width_, height_;
  Conv2dLayer expand_;    // 1x1, Cr -> C/2
};

/// Axial spatial learning module. Input/output [B,T,C/2,H,W]; each frame is
/// processed independently (time folds into the batch).
class ASLM {
 public:
  struct Trace {
    Var f_global, f_local, f_inte, f_dire;  // all [B*T,C/2,H,W]-shaped pieces
    Var gmp_h_profile;                      // [B*T,C/2,1,W] max over height
  };

  ASLM() = default;
  ASLM(ParamStore& store, const std::string& name, const SPLBConfig& cfg, Rng& rng);

  Var operator()(Graph& g, Var x, Trace* trace = nullptr) const;

 private:
  ParamStore* store_ = nullptr;
  SPLBConfig cfg_;
  AxialAttention attn_h_, attn_w_;
  Conv2dLayer local_a_, local_b_;  // 1x3 then 3x1 on the pooled map
  Conv2dLayer dire_w_, dire_h_;    // 3x1 on the width-pooled profile, 1x3 on the height-pooled
  Conv2dLayer refine_;             // 3x3 on F_inte
};

/// Spatiotemporal priors learning block: split, STLM + ASLM, fused residual.
/// Input/output [B,T,C,H,W].
class SPLB {
 public:
  SPLB() = default;
  SPLB(ParamStore& store, const std::string& name, const SPLBConfig& cfg, Rng& rng);

  Var operator()(Graph& g, Var x) const;
  const SPLBConfig& config() const { return cfg_; }

 private:
  ParamStore* store_ = nullptr;
  SPLBConfig cfg_;
  STLM stlm_;
  ASLM aslm_;
  Conv2dLayer plain_t_, plain_s_;  // stand-ins when a branch is toggled off
  Conv2dLayer fuse_;               // 3x3, C/2 -> C/2
};

struct DiscriminatorConfig {
  int stem_channels = 16;  // doubled after every block, 16 -> 128
  int num_blocks = 4;
  int time_steps = 3;
  int compression = 4;
  int attention_heads = 4;
  bool use_stlm = true;
  bool use_aslm = true;

  void validate() const;
};

/// Four stacked SPLBs over a depth-sequence batch [B,T,1,H,W] -> raw LSGAN
/// score per sequence [B]. H and W must be divisible by 2^4 (stride-2 stem
/// plus three stride-2 stage transitions).
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(ParamStore& store, const std::string& name, const DiscriminatorConfig& cfg,
                Rng& rng);

  Var operator()(Graph& g, Var sequences) const;
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  ParamStore* store_ = nullptr;
  DiscriminatorConfig cfg_;
  Conv2dLayer stem_;
  std::vector<SPLB> blocks_;
  std::vector<Conv2dLayer> downs_;
  LinearLayer head_;
};

/// Per-map min-max normalization of a disparity sequence [B,T,1,H,W] to
/// [0,1]; differentiable, used to build the discriminator input.
Var normalize_disparity_sequence(Graph& g, Var x);

/// [B,T,C,H,W] <-> [B*T,C,H,W]
Var fold_time(Var x);
Var unfold_time(Var x, int batch, int time_steps);

/// Axial attention over one spatial axis of [N,C,H,W].
Var attend_width(Graph& g, const AxialAttention& attn, Var x);
Var attend_height(Graph& g, const AxialAttention& attn, Var x);

}  // namespace dasp::splb

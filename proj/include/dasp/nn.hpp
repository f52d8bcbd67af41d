#pragma once

#include <string>

#include "dasp/graph.hpp"
#include "dasp/params.hpp"
#include "dasp/rng.hpp"

namespace dasp {

/// Weight initialization styles for conv/linear layers.
enum class Init { kHeNormal, kZero, kIdentity };

/// 2-d convolution layer owning its parameters in a ParamStore.
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ParamStore& store, const std::string& name, int cin, int cout, int kh, int kw,
              int stride, int pad_h, int pad_w, Rng& rng, Init init = Init::kHeNormal,
              bool bias = true);

  Var operator()(Graph& g, Var x) const;

  int weight_id() const { return w_; }
  int bias_id() const { return b_; }

 private:
  ParamStore* store_ = nullptr;
  int w_ = -1, b_ = -1;
  int stride_ = 1, pad_h_ = 0, pad_w_ = 0;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
              Init init = Init::kHeNormal);

  Var operator()(Graph& g, Var x) const;  // x [N,in] -> [N,out]

  int weight_id() const { return w_; }
  int bias_id() const { return b_; }

 private:
  ParamStore* store_ = nullptr;
  int w_ = -1, b_ = -1;
};

/// Multi-head self-attention along the last axis of x [B, C, L]:
/// every (batch, position-off-axis) row attends over L. Projections are
/// per-channel (1x1). Heads must divide C.
class AxialAttention {
 public:
  AxialAttention() = default;
  AxialAttention(ParamStore& store, const std::string& name, int channels, int heads, Rng& rng,
                 Init init = Init::kHeNormal);

  /// attn_out, when given, receives the softmaxed attention weights
  /// [B*heads, L, L] for inspection.
  Var operator()(Graph& g, Var x, Var* attn_out = nullptr) const;

  int heads() const { return heads_; }

 private:
  ParamStore* store_ = nullptr;
  LinearLayer qkv_, proj_;
  int channels_ = 0, heads_ = 1;
};

/// Largest h <= requested that divides channels (>=1).
int effective_heads(int channels, int requested);

/// Overwrite a conv weight with the identity kernel (center tap, matching
/// channels). Requires cin == cout.
void conv_set_identity(ParamStore& store, int weight_id);

/// Zero every parameter whose name starts with `prefix`.
void zero_params_with_prefix(ParamStore& store, const std::string& prefix);

}  // namespace dasp

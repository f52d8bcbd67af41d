#pragma once

#include <vector>

#include "dasp/graph.hpp"
#include "dasp/params.hpp"

namespace dasp {

struct AdamConfig {
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
};

/// Adam over a fixed parameter subset. Refuses to touch frozen parameters.
class Adam {
 public:
  Adam(std::vector<int> param_ids, AdamConfig cfg = {}) : ids_(std::move(param_ids)), cfg_(cfg) {}

  /// Applies one update using the gradients accumulated in `g`. Parameters
  /// that received no gradient are left untouched.
  void step(ParamStore& store, const Graph& g, real lr);

  int steps_taken() const { return t_; }
  const std::vector<int>& param_ids() const { return ids_; }

 private:
  std::vector<int> ids_;
  AdamConfig cfg_;
  int t_ = 0;
};

}  // namespace dasp

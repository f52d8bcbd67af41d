#include "dasp/adam.hpp"

#include <cmath>

namespace dasp {

void Adam::step(ParamStore& store, const Graph& g, real lr) {
  ++t_;
  const real bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const real bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (int id : ids_) {
    ParamDef& d = store.def(id);
    DASP_CHECK(d.trainable, "attempt to update frozen parameter: " + d.name);
    const Tensor& grad = g.param_grad(id);
    if (grad.empty()) continue;
    if (d.adam_m.empty()) {
      d.adam_m = Tensor::zeros(d.value.shape());
      d.adam_v = Tensor::zeros(d.value.shape());
    }
    const std::int64_t n = d.value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const real gi = grad[i];
      d.adam_m[i] = cfg_.beta1 * d.adam_m[i] + (1.0 - cfg_.beta1) * gi;
      d.adam_v[i] = cfg_.beta2 * d.adam_v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const real mhat = d.adam_m[i] / bc1;
      const real vhat = d.adam_v[i] / bc2;
      d.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dasp

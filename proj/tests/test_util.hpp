#pragma once

#include <functional>
#include <vector>

#include "dasp/graph.hpp"
#include "dasp/tensor.hpp"

namespace dasp::testutil {

/// Builds a scalar expression from leaf inputs.
using BuildFn = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Central finite-difference check of analytic gradients in double precision.
/// Returns the worst relative error over every element of every input.
inline real fd_check(const BuildFn& build, const std::vector<Tensor>& inputs, real step = 1e-4) {
  // Analytic pass.
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
    Var loss = build(g, leaves);
    DASP_CHECK(loss.val().numel() == 1, "fd_check: loss must be scalar");
    g.backward(loss);
    for (const Var& v : leaves)
      analytic.push_back(v.grad().empty() ? Tensor::zeros(v.val().shape()) : v.grad());
  }

  auto eval = [&](const std::vector<Tensor>& in) {
    Graph g;
    std::vector<Var> leaves;
    leaves.reserve(in.size());
    for (const Tensor& t : in) leaves.push_back(g.leaf(t, false));
    return build(g, leaves).val().item();
  };

  real worst = 0;
  std::vector<Tensor> work = inputs;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (std::int64_t j = 0; j < inputs[i].numel(); ++j) {
      const real orig = work[i][j];
      work[i][j] = orig + step;
      const real lp = eval(work);
      work[i][j] = orig - step;
      const real lm = eval(work);
      work[i][j] = orig;
      const real fd = (lp - lm) / (2 * step);
      const real an = analytic[i][j];
      const real rel = std::abs(an - fd) / std::max<real>(1e-6, std::abs(an) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace dasp::testutil

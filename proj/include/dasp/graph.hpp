#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp {

class Graph;
class ParamStore;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Graph& graph() const { return *g_; }
  int id() const { return id_; }
  bool valid() const { return g_ != nullptr; }
  const Tensor& val() const;
  const Tensor& grad() const;
  const Shape& shape() const { return val().shape(); }
  int dim(int i) const { return val().dim(i); }

 private:
  friend class Graph;
  Var(Graph* g, int id) : g_(g), id_(id) {}
  Graph* g_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are created in topological order; backward walks
/// the tape once, in reverse. One backward pass per graph.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var scalar(real v) { return leaf(Tensor::scalar(v), false); }

  /// Bind a parameter as a leaf. Memoized: binding the same parameter twice
  /// returns the same node, so gradients from all uses accumulate.
  Var param(ParamStore& store, int param_id);

  void backward(const Var& root);

  /// Gradient accumulated for a bound parameter; empty tensor if the
  /// parameter got no gradient.
  const Tensor& param_grad(int param_id) const;
  const std::vector<std::pair<int, int>>& bound_params() const { return param_nodes_; }

  const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  size_t size() const { return nodes_.size(); }

  // --- internals used by op builders ---
  using BackwardFn = std::function<void(Graph&, int self)>;
  Var make(Tensor value, std::vector<int> parents, BackwardFn bw);
  void acc(int id, Tensor g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> param_nodes_;  // (param_id, node_id)
  bool ran_backward_ = false;
};

// ---------- elementwise (NumPy-style broadcasting on binary ops) ----------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var add_scalar(Var a, real c);
Var mul_scalar(Var a, real c);

Var vexp(Var a);
Var vlog(Var a);
Var vsqrt(Var a);
Var vabs(Var a);
Var square(Var a);
Var sigmoid(Var a);
Var elu(Var a);
Var clamp_min(Var a, real c);

/// sin(sqrt(s))/sqrt(s) and (1-cos(sqrt(s)))/s as smooth functions of s >= 0.
/// Both are entire in s; series expansions keep them exact through s = 0.
Var rot_coef_a(Var s);
Var rot_coef_b(Var s);

// ---------- reductions ----------
Var sum_all(Var a);
Var mean_all(Var a);
Var sum_axis(Var a, int axis, bool keepdim);
Var mean_axis(Var a, int axis, bool keepdim);
Var max_axis(Var a, int axis, bool keepdim);

// ---------- movement ----------
Var reshape(Var a, Shape s);
Var permute(Var a, std::vector<int> axes);
Var slice(Var a, int axis, int start, int len);
Var concat(const std::vector<Var>& parts, int axis);
Var pad_zero(Var a, int axis, int before, int after);
Var pad_replicate2d(Var a, int p);  // replicate-pads the last two dims
Var detach(Var a);

// ---------- linear algebra / nn ----------
Var matmul(Var a, Var b);  // [M,K]x[K,N] or [B,M,K]x[B,K,N]
Var softmax_lastdim(Var a);
/// x [N,Cin,H,W], w [Cout,Cin,kh,kw], optional bias [Cout]; zero padding.
Var conv2d(Var x, Var w, Var bias, int stride, int pad_h, int pad_w);
Var conv2d(Var x, Var w, int stride, int pad_h, int pad_w);
Var avg_pool2(Var x);     // factor-2 non-overlapping mean pool, last two dims
Var bilinear_up2(Var x);  // factor-2 bilinear upsample, last two dims

/// image [C,H,W], coords [2,Ho,Wo] with coords[0]=column (x), coords[1]=row (y).
/// Out-of-range coords clamp to the border. NaN coords throw.
Var bilinear_sample(Var image, Var coords);
/// 1.0 where coords land inside [0,W-1]x[0,H-1], else 0.0. Shape [Ho,Wo].
Tensor bilinear_inbounds_mask(const Tensor& coords, int img_h, int img_w);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace dasp

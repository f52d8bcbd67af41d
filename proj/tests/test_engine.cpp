#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dasp/adam.hpp"
#include "dasp/graph.hpp"
#include "dasp/nn.hpp"
#include "dasp/params.hpp"
#include "dasp/rng.hpp"
#include "dasp/tensor_math.hpp"
#include "test_util.hpp"

using namespace dasp;
using testutil::fd_check;

namespace {
Tensor rt(Rng& rng, Shape s, real lo = -1.0, real hi = 1.0) { return rng.uniform_tensor(std::move(s), lo, hi); }
}  // namespace

TEST_CASE("tensor basics") {
  Tensor t(Shape{2, 3});
  t.at({1, 2}) = 5.0;
  CHECK(t[5] == 5.0);
  CHECK(t.numel() == 6);
  CHECK_THROWS(Tensor(Shape{2, 2}, {1.0, 2.0, 3.0}));
  Tensor r = t.reshaped({3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r[5] == 5.0);
}

TEST_CASE("broadcasting add/mul values") {
  Tensor a(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b(Shape{3}, {10, 20, 30});
  Tensor c = t_add(a, b);
  CHECK(c.at({1, 0}) == 14);
  CHECK(c.at({0, 2}) == 33);
  Tensor s = Tensor::scalar(2.0);
  Tensor d = t_mul(a, s);
  CHECK(d.at({1, 2}) == 12);
  Tensor col(Shape{2, 1}, {1, 2});
  Tensor e = t_mul(a, col);
  CHECK(e.at({1, 1}) == 10);
  CHECK_THROWS(t_add(Tensor(Shape{2}), Tensor(Shape{3})));
}

TEST_CASE("reduce_to reverses broadcasting") {
  Tensor g(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t_reduce_to(g, Shape{3});
  CHECK(r.at({0}) == 5);
  CHECK(r.at({2}) == 9);
  Tensor r2 = t_reduce_to(g, Shape{2, 1});
  CHECK(r2.at({0, 0}) == 6);
  CHECK(r2.at({1, 0}) == 15);
  Tensor r3 = t_reduce_to(g, Shape{1});
  CHECK(r3.item() == 21);
}

TEST_CASE("gradient: elementwise chain") {
  Rng rng(7);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    Var x = in[0], y = in[1];
    Var z = add(mul(sigmoid(x), vexp(y)), div(square(x), add_scalar(vabs(y), 2.0)));
    return mean_all(mul(z, z));
  };
  CHECK(fd_check(build, {rt(rng, {3, 4}), rt(rng, {3, 4})}) < 1e-6);
}

TEST_CASE("gradient: broadcast binary ops") {
  Rng rng(9);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    Var z = mul(in[0], in[1]);       // [2,3,4] * [3,1]
    Var w = div(z, add_scalar(vabs(in[2]), 1.0));  // / [4]
    return sum_all(square(w));
  };
  CHECK(fd_check(build, {rt(rng, {2, 3, 4}), rt(rng, {3, 1}, 0.5, 1.5), rt(rng, {4})}) < 1e-6);
}

TEST_CASE("gradient: log sqrt clamp elu") {
  Rng rng(11);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    Var a = vlog(add_scalar(vabs(in[0]), 1.0));
    Var b = vsqrt(add_scalar(square(in[0]), 0.3));
    Var c = clamp_min(in[0], 0.1);
    Var d = elu(in[0]);
    return mean_all(add(add(a, b), add(c, d)));
  };
  // keep away from the clamp kink at 0.1
  Tensor x = rt(rng, {4, 4}, 0.2, 1.7);
  for (std::int64_t i = 0; i < x.numel(); i += 2) x[i] = -x[i];
  CHECK(fd_check(build, {x}) < 1e-6);
}

TEST_CASE("rotation coefficient ops: values and gradients through zero") {
  // A(s) = sin(sqrt(s))/sqrt(s), B(s) = (1-cos(sqrt(s)))/s
  Graph g;
  Var s0 = g.leaf(Tensor::scalar(0.0), false);
  CHECK(rot_coef_a(s0).val().item() == doctest::Approx(1.0));
  CHECK(rot_coef_b(s0).val().item() == doctest::Approx(0.5));
  Var s1 = g.leaf(Tensor::scalar(2.25), false);  // theta = 1.5
  CHECK(rot_coef_a(s1).val().item() == doctest::Approx(std::sin(1.5) / 1.5));
  CHECK(rot_coef_b(s1).val().item() == doctest::Approx((1 - std::cos(1.5)) / 2.25));
  // continuity across the series cutoff
  Graph g2;
  const real eps = 1e-4;
  const real a_lo = rot_coef_a(g2.leaf(Tensor::scalar(eps * (1 - 1e-9)))).val().item();
  const real a_hi = rot_coef_a(g2.leaf(Tensor::scalar(eps * (1 + 1e-9)))).val().item();
  CHECK(std::abs(a_lo - a_hi) < 1e-12);

  auto build = [](Graph& gg, const std::vector<Var>& in) {
    return sum_all(add(rot_coef_a(in[0]), rot_coef_b(in[0])));
  };
  Rng rng(3);
  CHECK(fd_check(build, {rt(rng, {5}, 1e-9, 4.0)}) < 1e-6);
}

TEST_CASE("gradient: reductions and movement") {
  Rng rng(13);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    Var x = in[0];
    Var a = sum_axis(x, 1, true);
    Var b = mean_axis(x, 0, false);
    Var c = max_axis(x, 2, true);
    Var d = permute(x, {2, 0, 1});
    Var e = slice(x, 1, 1, 2);
    Var f = concat({e, e}, 1);
    Var h = pad_zero(e, 1, 1, 1);
    return add(add(sum_all(square(a)), sum_all(square(b))),
               add(add(sum_all(square(c)), sum_all(square(d))),
                   add(sum_all(square(f)), sum_all(square(h)))));
  };
  CHECK(fd_check(build, {rt(rng, {2, 4, 3})}) < 1e-6);
}

TEST_CASE("gradient: matmul 2d and batched") {
  Rng rng(17);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    return sum_all(square(matmul(in[0], in[1])));
  };
  CHECK(fd_check(build, {rt(rng, {3, 4}), rt(rng, {4, 2})}) < 1e-6);
  CHECK(fd_check(build, {rt(rng, {2, 3, 4}), rt(rng, {2, 4, 2})}) < 1e-6);
}

TEST_CASE("matmul value against hand loop") {
  Rng rng(19);
  Tensor a = rt(rng, {3, 5}), b = rt(rng, {5, 2});
  Graph g;
  Tensor c = matmul(g.leaf(a), g.leaf(b)).val();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      real s = 0;
      for (int k = 0; k < 5; ++k) s += a.at({i, k}) * b.at({k, j});
      CHECK(c.at({i, j}) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("gradient: softmax") {
  Rng rng(23);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    return sum_all(square(softmax_lastdim(in[0])));
  };
  CHECK(fd_check(build, {rt(rng, {3, 5})}) < 1e-6);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(29);
  Graph g;
  Tensor y = softmax_lastdim(g.leaf(rt(rng, {4, 7}, -3, 3))).val();
  for (int r = 0; r < 4; ++r) {
    real s = 0;
    for (int c = 0; c < 7; ++c) s += y.at({r, c});
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("conv2d value against scalar loop") {
  Rng rng(31);
  const int N = 2, Cin = 3, H = 5, W = 6, Cout = 4, kh = 3, kw = 3, stride = 2, ph = 1, pw = 1;
  Tensor x = rt(rng, {N, Cin, H, W});
  Tensor w = rt(rng, {Cout, Cin, kh, kw});
  Tensor b = rt(rng, {Cout});
  Graph g;
  Tensor y = conv2d(g.leaf(x), g.leaf(w), g.leaf(b), stride, ph, pw).val();
  const int Ho = (H + 2 * ph - kh) / stride + 1;
  const int Wo = (W + 2 * pw - kw) / stride + 1;
  REQUIRE(y.shape() == Shape{N, Cout, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          real s = b.at({co});
          for (int ci = 0; ci < Cin; ++ci)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                const int si = i * stride + ki - ph, sj = j * stride + kj - pw;
                if (si >= 0 && si < H && sj >= 0 && sj < W)
                  s += x.at({n, ci, si, sj}) * w.at({co, ci, ki, kj});
              }
          CHECK(y.at({n, co, i, j}) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("gradient: conv2d avg_pool2 bilinear_up2 pad_replicate") {
  Rng rng(37);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    Var y = conv2d(in[0], in[1], in[2], 1, 1, 1);
    y = avg_pool2(y);
    y = bilinear_up2(y);
    y = pad_replicate2d(y, 1);
    return mean_all(square(y));
  };
  CHECK(fd_check(build, {rt(rng, {1, 2, 4, 6}), rt(rng, {3, 2, 3, 3}), rt(rng, {3})}) < 1e-6);
}

TEST_CASE("gradient: strided conv") {
  Rng rng(41);
  auto build = [](Graph& g, const std::vector<Var>& in) {
    return sum_all(square(conv2d(in[0], in[1], in[2], 2, 1, 1)));
  };
  CHECK(fd_check(build, {rt(rng, {2, 2, 6, 8}), rt(rng, {3, 2, 3, 3}), rt(rng, {3})}) < 1e-6);
}

TEST_CASE("bilinear_sample: identity grid and integer coords") {
  Rng rng(43);
  const int C = 2, H = 4, W = 5;
  Tensor img = rt(rng, {C, H, W});
  Tensor grid(Shape{2, H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      grid.at({0, i, j}) = j;
      grid.at({1, i, j}) = i;
    }
  Graph g;
  Tensor out = bilinear_sample(g.leaf(img), g.leaf(grid)).val();
  CHECK(max_abs_diff(out, img) == 0.0);
}

TEST_CASE("bilinear_sample: hand oracle and gradient") {
  Rng rng(47);
  const int C = 1, H = 5, W = 5;
  Tensor img = rt(rng, {C, H, W});
  Tensor coords(Shape{2, 3, 3});
  for (std::int64_t i = 0; i < 9; ++i) {
    coords[i] = rng.uniform(0.3, W - 1.3);      // u
    coords[9 + i] = rng.uniform(0.3, H - 1.3);  // v
  }
  Graph g;
  Tensor out = bilinear_sample(g.leaf(img), g.leaf(coords)).val();
  for (std::int64_t p = 0; p < 9; ++p) {
    const real u = coords[p], v = coords[9 + p];
    const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
    const real wx = u - x0, wy = v - y0;
    const real expect = (1 - wy) * ((1 - wx) * img.at({0, y0, x0}) + wx * img.at({0, y0, x0 + 1})) +
                        wy * ((1 - wx) * img.at({0, y0 + 1, x0}) + wx * img.at({0, y0 + 1, x0 + 1}));
    CHECK(std::abs(out[p] - expect) < 1e-6);
  }

  auto build = [](Graph& gg, const std::vector<Var>& in) {
    return mean_all(square(bilinear_sample(in[0], in[1])));
  };
  CHECK(fd_check(build, {img, coords}) < 1e-6);

  Tensor bad = coords;
  bad[0] = std::nan("");
  Graph g2;
  CHECK_THROWS(bilinear_sample(g2.leaf(img), g2.leaf(bad)));
}

TEST_CASE("bilinear_sample clamps out of bounds and masks them") {
  Tensor img(Shape{1, 2, 2}, {1, 2, 3, 4});
  Tensor coords(Shape{2, 1, 2}, {-5.0, 0.5, 0.0, 3.0});  // u pair, v pair
  Graph g;
  Tensor out = bilinear_sample(g.leaf(img), g.leaf(coords)).val();
  CHECK(out[0] == doctest::Approx(1.0));  // clamped to (0,0)
  CHECK(out[1] == doctest::Approx(3.5));  // v clamped to 1, u=0.5
  Tensor mask = bilinear_inbounds_mask(coords, 2, 2);
  CHECK(mask[0] == 0.0);
  CHECK(mask[1] == 0.0);
}

TEST_CASE("axial attention: shape, row-stochastic weights, gradient") {
  Rng rng(53);
  ParamStore store;
  AxialAttention attn(store, "attn", 4, 2, rng);
  Graph g;
  Var x = g.leaf(rt(rng, {3, 4, 5}), true);
  Var a;
  Var y = attn(g, x, &a);
  CHECK(y.shape() == Shape{3, 4, 5});
  const Tensor& aw = a.val();
  REQUIRE(aw.shape() == Shape{6, 5, 5});
  for (int b = 0; b < 6; ++b)
    for (int r = 0; r < 5; ++r) {
      real s = 0;
      for (int c = 0; c < 5; ++c) s += aw.at({b, r, c});
      CHECK(std::abs(s - 1.0) < 1e-5);
    }

  auto build = [&](Graph& gg, const std::vector<Var>& in) {
    return mean_all(square(attn(gg, in[0])));
  };
  CHECK(fd_check(build, {rt(rng, {2, 4, 5})}) < 1e-4);
}

TEST_CASE("param binding is memoized and grads accumulate") {
  Rng rng(59);
  ParamStore store;
  const int pid = store.add("w", Tensor::scalar(2.0));
  Graph g;
  Var w1 = g.param(store, pid);
  Var w2 = g.param(store, pid);
  CHECK(w1.id() == w2.id());
  Var loss = add(square(w1), mul_scalar(w2, 3.0));  // d/dw = 2w + 3 = 7
  g.backward(loss);
  CHECK(g.param_grad(pid).item() == doctest::Approx(7.0));
}

TEST_CASE("adam: descends a quadratic and refuses frozen params") {
  ParamStore store;
  const int pid = store.add("x", Tensor::scalar(5.0));
  Adam opt({pid});
  for (int i = 0; i < 200; ++i) {
    Graph g;
    Var x = g.param(store, pid);
    Var loss = square(add_scalar(x, -3.0));
    g.backward(loss);
    opt.step(store, g, 0.1);
  }
  CHECK(store.def(pid).value.item() == doctest::Approx(3.0).epsilon(1e-2));

  store.freeze_all();
  Graph g;
  Var x = g.param(store, pid);
  CHECK_FALSE(g.needs_grad(x.id()));
  Adam opt2({pid});
  Graph g2;
  Var x2 = g2.param(store, pid);
  (void)x2;
  CHECK_THROWS(opt2.step(store, g2, 0.1));
}

TEST_CASE("checkpoint round-trip preserves values, names, trainable flags") {
  Rng rng(61);
  ParamStore store;
  store.add("m.a", rt(rng, {3, 2}));
  store.add("m.b", rt(rng, {4}), false);
  const auto sum_before = store.checksum();
  save_checkpoint("/tmp/dasp_test_ckpt.bin", store, R"({"note":"t"})");
  ParamStore loaded;
  const std::string manifest = load_checkpoint("/tmp/dasp_test_ckpt.bin", loaded);
  CHECK(manifest.find("note") != std::string::npos);
  CHECK(loaded.checksum() == sum_before);
  CHECK(loaded.def(loaded.find("m.b")).trainable == false);
  CHECK_THROWS(load_checkpoint("/tmp/definitely_missing_ckpt.bin", loaded));
}

TEST_CASE("detach blocks gradient flow") {
  Graph g;
  Var x = g.leaf(Tensor::scalar(2.0), true);
  Var y = square(detach(square(x)));
  g.backward(y);
  CHECK(x.grad().empty());
}

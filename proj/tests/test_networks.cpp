#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dasp/geometry.hpp"
#include "dasp/networks.hpp"
#include "dasp/rng.hpp"
#include "test_util.hpp"

using namespace dasp;
using namespace dasp::networks;

TEST_CASE("disparity-to-depth bound mapping") {
  Graph g;
  const real min_d = 0.1, max_d = 100.0;
  Var lo = disparity_to_depth(g.constant(Tensor::scalar(1.0)), min_d, max_d);
  CHECK(lo.val().item() == doctest::Approx(min_d).epsilon(1e-12));
  Var hi = disparity_to_depth(g.constant(Tensor::scalar(1e-12)), min_d, max_d);
  CHECK(hi.val().item() == doctest::Approx(max_d).epsilon(1e-6));
  // interior values stay inside the bounds
  Rng rng(3);
  Var mid = disparity_to_depth(g.constant(rng.uniform_tensor({16}, 1e-6, 1.0)), min_d, max_d);
  CHECK(mid.val().min() >= min_d);
  CHECK(mid.val().max() <= max_d);
}

TEST_CASE("depth net: output shape, bounds, and invariants") {
  Rng rng(5);
  ParamStore store;
  DepthNetConfig cfg;
  DepthNet net(store, "depth", cfg, rng);
  Graph g;
  Tensor img = rng.uniform_tensor({3, 32, 64});
  DepthNet::Output out = net(g, g.constant(img));
  CHECK(out.disparity.shape() == Shape{32, 64});
  CHECK(out.depth.shape() == Shape{32, 64});
  CHECK(out.disparity.val().min() > 0.0);
  CHECK(out.disparity.val().max() < 1.0);
  CHECK(out.depth.val().min() >= cfg.min_depth);
  CHECK(out.depth.val().max() <= cfg.max_depth);
  // resolution must divide by 2^stages
  CHECK_THROWS(net(g, g.constant(rng.uniform_tensor({3, 30, 64}))));
  DepthNetConfig bad;
  bad.encoder_widths = {32, 16};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("pose net: zero-initialized head gives the identity pose") {
  Rng rng(7);
  ParamStore store;
  PoseNet net(store, "pose", PoseNetConfig{}, rng);
  Graph g;
  Tensor a = rng.uniform_tensor({3, 32, 64});
  Var pose = net(g, g.constant(a), g.constant(a));
  CHECK(pose.shape() == Shape{6});
  CHECK(pose.val().abs_max() == 0.0);  // exactly zero -> identity
  geometry::PoseSE3 p = geometry::PoseSE3::from_axis_angle(pose.val());
  p.validate();
  Tensor eye(Shape{3, 3});
  for (int i = 0; i < 3; ++i) eye.at({i, i}) = 1.0;
  CHECK(max_abs_diff(p.rotation, eye) == 0.0);
}

TEST_CASE("pose net: outputs decode to a valid pose on random inputs") {
  Rng rng(9);
  ParamStore store;
  PoseNet net(store, "pose", PoseNetConfig{}, rng);
  // randomize the head so the output is non-trivial
  ParamDef& w = store.def(store.find("pose.head.w"));
  w.value = rng.normal_tensor(w.value.shape(), 0.0, 0.1);
  for (int it = 0; it < 5; ++it) {
    Graph g;
    Var pose = net(g, g.constant(rng.uniform_tensor({3, 32, 64})),
                   g.constant(rng.uniform_tensor({3, 32, 64})));
    geometry::PoseSE3 p = geometry::PoseSE3::from_axis_angle(pose.val());
    p.validate();
    // decode then encode returns the same 6-vector
    CHECK(max_abs_diff(p.to_axis_angle(), pose.val()) < 1e-8);
  }
}

TEST_CASE("gradient flows from the composite loss to nearly every parameter") {
  Rng rng(11);
  ParamStore store;
  DepthNet depth(store, "depth", DepthNetConfig{}, rng);
  PoseNet pose(store, "pose", PoseNetConfig{}, rng);
  // randomize the pose head so its gradient path is active
  ParamDef& w = store.def(store.find("pose.head.w"));
  w.value = rng.normal_tensor(w.value.shape(), 0.0, 0.05);

  Graph g;
  Tensor target = rng.uniform_tensor({3, 32, 64}, 0.05, 0.95);
  Tensor source = rng.uniform_tensor({3, 32, 64}, 0.05, 0.95);
  geometry::CameraIntrinsics k;
  k.fx = 40;
  k.fy = 40;
  k.cx = 31.5;
  k.cy = 15.5;
  k.width = 64;
  k.height = 32;

  DepthNet::Output dt = depth(g, g.constant(target));
  Var p6 = pose(g, g.constant(target), g.constant(source));
  geometry::WarpResult warp = geometry::warp_frame(g, g.constant(source), dt.depth, p6, k);
  Var loss = mean_all(square(sub(warp.image, g.constant(target))));
  loss = add(loss, mean_all(square(dt.disparity)));
  g.backward(loss);

  std::int64_t nonzero = 0, total = 0;
  for (int id = 0; id < store.size(); ++id) {
    const Tensor& grad = g.param_grad(id);
    total += store.def(id).value.numel();
    if (grad.empty()) continue;
    for (std::int64_t i = 0; i < grad.numel(); ++i) nonzero += grad[i] != 0.0 ? 1 : 0;
  }
  CHECK(static_cast<real>(nonzero) / static_cast<real>(total) > 0.99);
}

TEST_CASE("frozen model produces identical outputs and refuses updates") {
  Rng rng(13);
  ParamStore store;
  DepthNet net(store, "depth", DepthNetConfig{}, rng);
  store.freeze_all();
  Tensor img = rng.uniform_tensor({3, 32, 64});
  Graph g1, g2;
  Tensor d1 = net(g1, g1.constant(img)).depth.val();
  Tensor d2 = net(g2, g2.constant(img)).depth.val();
  CHECK(max_abs_diff(d1, d2) == 0.0);

  // the frozen flag round-trips through a checkpoint
  save_checkpoint("/tmp/dasp_frozen_ckpt.bin", store, "{}");
  ParamStore loaded;
  load_checkpoint("/tmp/dasp_frozen_ckpt.bin", loaded);
  CHECK(loaded.all_frozen());
  CHECK(loaded.checksum() == store.checksum());
}

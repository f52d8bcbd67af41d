#include "dasp/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dasp/tensor_math.hpp"

namespace dasp::geometry {

namespace {

using Mat3 = Eigen::Matrix<real, 3, 3, Eigen::RowMajor>;
using Vec3 = Eigen::Matrix<real, 3, 1>;
using ConstMat3Map = Eigen::Map<const Mat3>;
using Mat3Map = Eigen::Map<Mat3>;

}  // namespace

void CameraIntrinsics::validate() const {
  DASP_CHECK(fx > 0 && fy > 0, "intrinsics: focal lengths must be positive");
  DASP_CHECK(width > 0 && height > 0, "intrinsics: image size must be positive");
  DASP_CHECK(cx >= 0 && cx < width, "intrinsics: cx out of image");
  DASP_CHECK(cy >= 0 && cy < height, "intrinsics: cy out of image");
}

Tensor CameraIntrinsics::as_matrix() const {
  Tensor k(Shape{3, 3});
  k.at({0, 0}) = fx;
  k.at({0, 2}) = cx;
  k.at({1, 1}) = fy;
  k.at({1, 2}) = cy;
  k.at({2, 2}) = 1.0;
  return k;
}

Tensor CameraIntrinsics::as_inverse_matrix() const {
  Tensor k(Shape{3, 3});
  k.at({0, 0}) = 1.0 / fx;
  k.at({0, 2}) = -cx / fx;
  k.at({1, 1}) = 1.0 / fy;
  k.at({1, 2}) = -cy / fy;
  k.at({2, 2}) = 1.0;
  return k;
}

Tensor CameraIntrinsics::pixel_grid() const {
  Tensor p(Shape{3, height, width});
  const std::int64_t hw = static_cast<std::int64_t>(height) * width;
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const std::int64_t off = static_cast<std::int64_t>(i) * width + j;
      p[off] = j;
      p[hw + off] = i;
      p[2 * hw + off] = 1.0;
    }
  return p;
}

Tensor CameraIntrinsics::ray_directions() const {
  Tensor d(Shape{3, height, width});
  const std::int64_t hw = static_cast<std::int64_t>(height) * width;
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const std::int64_t off = static_cast<std::int64_t>(i) * width + j;
      d[off] = (j - cx) / fx;
      d[hw + off] = (i - cy) / fy;
      d[2 * hw + off] = 1.0;
    }
  return d;
}

PoseSE3 PoseSE3::identity() {
  PoseSE3 p;
  for (int i = 0; i < 3; ++i) p.rotation.at({i, i}) = 1.0;
  return p;
}

Tensor rotation_matrix_from_axis_angle(const Tensor& w3) {
  DASP_CHECK(w3.numel() == 3, "axis-angle must have 3 components");
  const real s = w3[0] * w3[0] + w3[1] * w3[1] + w3[2] * w3[2];
  real a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (s < 1e-4) {
    a = 1.0 - s / 6.0 + s * s / 120.0;
    b = 0.5 - s / 24.0 + s * s / 720.0;
  } else {
    const real t = std::sqrt(s);
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / s;
  }
  Mat3 K;
  K << 0, -w3[2], w3[1], w3[2], 0, -w3[0], -w3[1], w3[0], 0;
  Mat3 R = Mat3::Identity() + a * K + b * K * K;
  Tensor out(Shape{3, 3});
  Mat3Map(out.data()) = R;
  return out;
}

PoseSE3 PoseSE3::from_axis_angle(const Tensor& aa6) {
  DASP_CHECK(aa6.numel() == 6, "pose 6-vector expected");
  PoseSE3 p;
  Tensor w(Shape{3}, {aa6[0], aa6[1], aa6[2]});
  p.rotation = rotation_matrix_from_axis_angle(w);
  p.translation = Tensor(Shape{3}, {aa6[3], aa6[4], aa6[5]});
  return p;
}

Tensor PoseSE3::to_axis_angle() const {
  ConstMat3Map R(rotation.data());
  const real tr = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const real theta = std::acos(tr);
  DASP_CHECK(theta < M_PI - 1e-6, "axis-angle extraction undefined near pi");
  Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  real factor;
  if (theta < 1e-4) {
    factor = 0.5 + theta * theta / 12.0;  // theta / (2 sin theta), series
  } else {
    factor = theta / (2.0 * std::sin(theta));
  }
  Vec3 w = factor * vee;
  Tensor out(Shape{6});
  for (int i = 0; i < 3; ++i) {
    out[i] = w(i);
    out[3 + i] = translation[i];
  }
  return out;
}

PoseSE3 PoseSE3::compose(const PoseSE3& other) const {
  ConstMat3Map Ra(rotation.data());
  ConstMat3Map Rb(other.rotation.data());
  PoseSE3 out;
  Mat3Map(out.rotation.data()) = Ra * Rb;
  for (int i = 0; i < 3; ++i) {
    real v = translation[i];
    for (int j = 0; j < 3; ++j) v += Ra(i, j) * other.translation[j];
    out.translation[i] = v;
  }
  return out;
}

PoseSE3 PoseSE3::inverse() const {
  ConstMat3Map R(rotation.data());
  PoseSE3 out;
  Mat3 Rt = R.transpose();
  Mat3Map(out.rotation.data()) = Rt;
  for (int i = 0; i < 3; ++i) {
    real v = 0;
    for (int j = 0; j < 3; ++j) v -= Rt(i, j) * translation[j];
    out.translation[i] = v;
  }
  return out;
}

Tensor PoseSE3::apply(const Tensor& point3) const {
  DASP_CHECK(point3.numel() == 3, "apply expects a 3-point");
  Tensor out(Shape{3});
  for (int i = 0; i < 3; ++i) {
    real v = translation[i];
    for (int j = 0; j < 3; ++j) v += rotation.at({i, j}) * point3[j];
    out[i] = v;
  }
  return out;
}

void PoseSE3::validate() const {
  DASP_CHECK((rotation.shape() == Shape{3, 3} && translation.shape() == Shape{3}),
             "pose shape invalid");
  ConstMat3Map R(rotation.data());
  Mat3 err = R.transpose() * R - Mat3::Identity();
  DASP_CHECK(err.cwiseAbs().maxCoeff() < 1e-6, "rotation is not orthonormal");
  DASP_CHECK(std::abs(R.determinant() - 1.0) < 1e-6, "rotation determinant is not +1");
}

DepthMap DepthMap::dense(Tensor values) {
  DepthMap d;
  d.valid_mask = Tensor::ones(values.shape());
  d.values = std::move(values);
  return d;
}

void DepthMap::validate(real min_depth, real max_depth) const {
  DASP_CHECK(values.ndim() == 2, "depth map must be [H,W]");
  DASP_CHECK(values.same_shape(valid_mask), "depth/valid_mask shape mismatch");
  for (std::int64_t i = 0; i < values.numel(); ++i) {
    if (valid_mask[i] == 0.0) continue;
    DASP_CHECK(values[i] > 0, "depth must be positive where valid");
    DASP_CHECK(values[i] >= min_depth && values[i] <= max_depth,
               "depth outside [min_depth, max_depth]");
  }
}

// ------------------------------------------------------------------
// differentiable ops
// ------------------------------------------------------------------

Var rotation_from_axis_angle(Graph& g, Var w3) {
  DASP_CHECK(w3.val().numel() == 3, "rotation_from_axis_angle expects [3]");
  Var w = reshape(w3, {3});
  Var s = sum_all(square(w));
  Var a = rot_coef_a(s);
  Var b = rot_coef_b(s);
  Var wx = slice(w, 0, 0, 1), wy = slice(w, 0, 1, 1), wz = slice(w, 0, 2, 1);
  Var zero = g.constant(Tensor::zeros(Shape{1}));
  Var skew = reshape(concat({zero, neg(wz), wy, wz, zero, neg(wx), neg(wy), wx, zero}, 0), {3, 3});
  Var eye = g.constant([] {
    Tensor t(Shape{3, 3});
    for (int i = 0; i < 3; ++i) t.at({i, i}) = 1.0;
    return t;
  }());
  return add(eye, add(mul(skew, a), mul(matmul(skew, skew), b)));
}

Var backproject(Graph& g, Var depth, const CameraIntrinsics& K) {
  K.validate();
  const Shape& s = depth.val().shape();
  DASP_CHECK((s == Shape{K.height, K.width}),
             "depth shape " + shape_str(s) + " does not match intrinsics " +
                 std::to_string(K.height) + "x" + std::to_string(K.width));
  Var dirs = g.constant(K.ray_directions());
  return mul(reshape(depth, {1, K.height, K.width}), dirs);
}

Reprojection reproject(Graph& g, Var points, Var pose6, const CameraIntrinsics& K) {
  const Shape& s = points.val().shape();
  DASP_CHECK((s == Shape{3, K.height, K.width}), "points must be [3,H,W] matching intrinsics");
  DASP_CHECK(pose6.val().numel() == 6, "pose must be a 6-vector");
  const int H = K.height, W = K.width;
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;

  Var pose = reshape(pose6, {6});
  Var rot = slice(pose, 0, 0, 3);
  Var tr = reshape(slice(pose, 0, 3, 3), {3, 1});
  Var R = rotation_from_axis_angle(g, rot);
  Var x = add(matmul(R, reshape(points, {3, static_cast<int>(hw)})), tr);  // [3,HW]

  Var z = slice(x, 0, 2, 1);  // [1,HW]
  Var z_safe = clamp_min(z, kZEps);
  Var u = add_scalar(mul_scalar(div(slice(x, 0, 0, 1), z_safe), K.fx), K.cx);
  Var v = add_scalar(mul_scalar(div(slice(x, 0, 1, 1), z_safe), K.fy), K.cy);
  Var pixels = reshape(concat({u, v}, 0), {2, H, W});

  Reprojection out;
  out.pixels = pixels;
  out.depth_in_source = reshape(z, {1, H, W});
  Tensor frontal(Shape{H, W});
  const Tensor& zt = z.val();
  const Tensor& pt = pixels.val();
  for (std::int64_t i = 0; i < hw; ++i) {
    const real uu = pt[i], vv = pt[hw + i];
    frontal[i] =
        (zt[i] > kZEps && uu >= 0.0 && uu <= W - 1.0 && vv >= 0.0 && vv <= H - 1.0) ? 1.0 : 0.0;
  }
  out.frontal_mask = std::move(frontal);
  return out;
}

WarpResult warp_frame(Graph& g, Var source_image, Var depth_t, Var pose6,
                      const CameraIntrinsics& K) {
  const Shape& is = source_image.val().shape();
  DASP_CHECK(is.size() == 3 && is[1] == K.height && is[2] == K.width,
             "source image must be [C,H,W] matching intrinsics");
  Var points = backproject(g, depth_t, K);
  Reprojection rp = reproject(g, points, pose6, K);
  WarpResult out;
  out.image = bilinear_sample(source_image, rp.pixels);
  out.coords = rp.pixels;
  out.validity = rp.frontal_mask;  // frontal test already includes in-bounds
  return out;
}

LiftPair lift_pair_to_3d(Graph& g, Var depth_t, Var depth_s, Var pose6,
                         const CameraIntrinsics& K) {
  DASP_CHECK(depth_t.val().same_shape(depth_s.val()), "depth maps must share shape");
  const int H = K.height, W = K.width;
  Var points = backproject(g, depth_t, K);
  Var pose = reshape(pose6, {6});
  Var R = rotation_from_axis_angle(g, slice(pose, 0, 0, 3));
  Var tr = reshape(slice(pose, 0, 3, 3), {3, 1});
  Var x = add(matmul(R, reshape(points, {3, H * W})), tr);  // transformed target points

  Var z = slice(x, 0, 2, 1);
  Var z_safe = clamp_min(z, kZEps);
  Var u = add_scalar(mul_scalar(div(slice(x, 0, 0, 1), z_safe), K.fx), K.cx);
  Var v = add_scalar(mul_scalar(div(slice(x, 0, 1, 1), z_safe), K.fy), K.cy);
  Var pix = reshape(concat({u, v}, 0), {2, H, W});

  Var ds_hat = bilinear_sample(reshape(depth_s, {1, H, W}), pix);  // [1,H,W]

  // Continuous K^-1 (u, v, 1) at the sampled position.
  Var ru = mul_scalar(add_scalar(u, -K.cx), 1.0 / K.fx);
  Var rv = mul_scalar(add_scalar(v, -K.cy), 1.0 / K.fy);
  Var rone = g.constant(Tensor::ones(Shape{1, H * W}));
  Var dirs_s = reshape(concat({ru, rv, rone}, 0), {3, H, W});
  Var lifted_s = mul(ds_hat, dirs_s);

  LiftPair out;
  out.residuals = sub(lifted_s, reshape(x, {3, H, W}));
  out.projected_depth = reshape(z, {1, H, W});
  out.sampled_source_depth = ds_hat;

  Tensor validity(Shape{H, W});
  const Tensor& zt = z.val();
  const Tensor& pt = pix.val();
  const std::int64_t hw = static_cast<std::int64_t>(H) * W;
  for (std::int64_t i = 0; i < hw; ++i) {
    const real uu = pt[i], vv = pt[hw + i];
    validity[i] =
        (zt[i] > kZEps && uu >= 0.0 && uu <= W - 1.0 && vv >= 0.0 && vv <= H - 1.0) ? 1.0 : 0.0;
  }
  out.validity = std::move(validity);
  return out;
}

WarpValues warp_frame(const Tensor& source_image, const DepthMap& depth_t, const PoseSE3& pose,
                      const CameraIntrinsics& K, real min_depth, real max_depth) {
  depth_t.validate(min_depth, max_depth);
  pose.validate();
  Graph g;
  Var src = g.constant(source_image);
  Var d = g.constant(depth_t.values);
  Var p = g.constant(pose.to_axis_angle());
  WarpResult r = warp_frame(g, src, d, p, K);
  WarpValues out;
  out.image = r.image.val();
  out.validity = t_mul(r.validity, depth_t.valid_mask);
  return out;
}

}  // namespace dasp::geometry

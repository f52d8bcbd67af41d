#pragma once

#include "dasp/graph.hpp"
#include "dasp/tensor.hpp"

namespace dasp::geometry {

/// Pixels behind the camera closer than this along z are masked out.
inline constexpr real kZEps = 1e-3;

/// Pinhole intrinsics. No skew, no distortion.
struct CameraIntrinsics {
  real fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
  Tensor as_matrix() const;          // [3,3]
  Tensor as_inverse_matrix() const;  // [3,3]
  /// Homogeneous pixel coordinates (u, v, 1), layout [3,H,W].
  Tensor pixel_grid() const;
  /// K^-1 * (u, v, 1) per pixel, layout [3,H,W].
  Tensor ray_directions() const;
};

/// Rigid transform; rotation as a 3x3 matrix plus translation in meters.
struct PoseSE3 {
  Tensor rotation{Shape{3, 3}};
  Tensor translation{Shape{3}};

  static PoseSE3 identity();
  /// 6-vector: axis-angle (radians) then translation (meters).
  static PoseSE3 from_axis_angle(const Tensor& aa6);
  Tensor to_axis_angle() const;  // [6]; requires rotation angle < pi

  PoseSE3 compose(const PoseSE3& other) const;  // this applied after other
  PoseSE3 inverse() const;
  Tensor apply(const Tensor& point3) const;  // R p + t

  void validate() const;
};

Tensor rotation_matrix_from_axis_angle(const Tensor& w3);  // value-level Rodrigues

struct DepthMap {
  Tensor values;      // [H,W], meters
  Tensor valid_mask;  // [H,W], 1.0 valid / 0.0 invalid

  static DepthMap dense(Tensor values);  // all pixels valid
  void validate(real min_depth, real max_depth) const;
  int height() const { return values.dim(0); }
  int width() const { return values.dim(1); }
};

// ------------------------------------------------------------------
// Differentiable ops. Depth enters as [H,W], images as [C,H,W], pose as a
// 6-vector var (axis-angle + translation); masks are plain tensors since
// no gradient flows through them.
// ------------------------------------------------------------------

/// Rodrigues on the tape: [3] axis-angle -> [3,3] rotation.
Var rotation_from_axis_angle(Graph& g, Var w3);

/// Depth [H,W] to camera-frame points [3,H,W].
Var backproject(Graph& g, Var depth, const CameraIntrinsics& K);

struct Reprojection {
  Var pixels;          // [2,H,W]: source (u, v) per target pixel
  Var depth_in_source; // [1,H,W]: z after the rigid transform
  Tensor frontal_mask; // [H,W]: 1 where z > kZEps and pixel lands in-image
};
Reprojection reproject(Graph& g, Var points, Var pose6, const CameraIntrinsics& K);

struct WarpResult {
  Var image;        // [C,H,W], synthesized target view
  Var coords;       // [2,H,W]
  Tensor validity;  // [H,W]
};
WarpResult warp_frame(Graph& g, Var source_image, Var depth_t, Var pose6,
                      const CameraIntrinsics& K);

struct LiftPair {
  Var residuals;            // [3,H,W]: source-lift minus transformed target point
  Var projected_depth;      // [1,H,W]: z of the transformed target point
  Var sampled_source_depth; // [1,H,W]: source depth interpolated at p_s
  Tensor validity;          // [H,W]
};
LiftPair lift_pair_to_3d(Graph& g, Var depth_t, Var depth_s, Var pose6,
                         const CameraIntrinsics& K);

// ------------------------------------------------------------------
// Value-level wrappers used by data generation and evaluation. These
// validate DepthMap invariants before touching the tape.
// ------------------------------------------------------------------

struct WarpValues {
  Tensor image;
  Tensor validity;
};
WarpValues warp_frame(const Tensor& source_image, const DepthMap& depth_t, const PoseSE3& pose,
                      const CameraIntrinsics& K, real min_depth, real max_depth);

}  // namespace dasp::geometry

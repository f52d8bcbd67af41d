#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dasp/geometry.hpp"
#include "dasp/rng.hpp"

namespace dasp::synthdata {

/// Smooth seeded texture: a small sum of sinusoids over world position. Low
/// frequencies keep bilinear resampling error under the reprojection
/// tolerance while still feeding the photometric loss.
struct TextureSpec {
  std::uint64_t seed = 0;
  std::vector<real> frequencies = {0.35, 0.8, 1.7};  // rad/m
  real contrast = 0.25;
  real base_brightness = 0.5;
};

struct TexturedPlane {
  Tensor normal{Shape{3}};  // world frame; plane is normal . X = offset
  real offset = 0;
  TextureSpec texture;
};

struct MovingBox {
  Tensor center0{Shape{3}};     // world center at frame 0
  Tensor half_extent{Shape{3}};
  Tensor velocity{Shape{3}};    // m/frame
  TextureSpec texture;
};

struct Lamp {
  Tensor position{Shape{3}};  // world
  real strength = 0.8;
  real radius_m = 0.5;        // blob radius at 1 m, scales with fx/z
};

struct IlluminationProfile {
  bool night = false;
  real gain = 0.15;
  real gamma = 2.2;
  real noise_sigma = 0.02;
  std::vector<Lamp> lamps;  // used only at night
};

struct SceneSpec {
  std::vector<TexturedPlane> planes;
  std::vector<MovingBox> boxes;
  std::vector<geometry::PoseSE3> trajectory;  // camera-to-world, one per frame
  IlluminationProfile illumination;
  real min_depth = 0.1;
  real max_depth = 100.0;
  std::uint64_t seed = 0;  // drives the night noise stream

  /// Renders ground-truth depth for every frame and rejects geometry behind
  /// the camera, uncovered pixels, or depth outside the configured bounds.
  void validate(const geometry::CameraIntrinsics& K, int frames) const;
};

struct GeneratedSample {
  std::vector<Tensor> frames;                 // T x [3,H,W]
  std::vector<geometry::DepthMap> gt_depth;   // T
  std::vector<geometry::PoseSE3> gt_pose;     // T-1, camera t -> camera t+1
  std::vector<Tensor> dynamic_mask;           // T x [H,W], 1 on moving-object pixels
  std::string domain = "day";
  std::uint64_t seed = 0;

  int frame_count() const { return static_cast<int>(frames.size()); }
};

GeneratedSample render_sequence(const SceneSpec& spec, int frames,
                                const geometry::CameraIntrinsics& K);

/// Same geometry and trajectory, two illumination profiles. Ground truth is
/// shared between the two samples.
std::pair<GeneratedSample, GeneratedSample> day_night_pair(const SceneSpec& spec, int frames,
                                                           const geometry::CameraIntrinsics& K);

/// Desk-scale driving-like scene (ground, walls, backdrop, moving boxes,
/// forward trajectory), randomized from the seed.
SceneSpec make_default_scene(std::uint64_t seed, const geometry::CameraIntrinsics& K);

/// Default desk-scale intrinsics (64x128).
geometry::CameraIntrinsics default_intrinsics(int height = 64, int width = 128);

/// On-disk layout: frame_XX.ppm, depth_XX.bin, mask_XX.pgm, poses.txt,
/// manifest.json under one directory per sequence.
void write_sample(const std::string& dir, const GeneratedSample& sample,
                  const geometry::CameraIntrinsics& K);
GeneratedSample read_sample(const std::string& dir, geometry::CameraIntrinsics* k_out = nullptr);

}  // namespace dasp::synthdata

#include "dasp/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "dasp/image_io.hpp"

namespace dasp::synthdata {

namespace {

using geometry::CameraIntrinsics;
using geometry::PoseSE3;

struct Vec {
  real x = 0, y = 0, z = 0;
  Vec operator+(const Vec& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec operator-(const Vec& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec operator*(real s) const { return {x * s, y * s, z * s}; }
  real dot(const Vec& o) const { return x * o.x + y * o.y + z * o.z; }
};

Vec to_vec(const Tensor& t) { return {t[0], t[1], t[2]}; }

Vec rotate(const Tensor& R, const Vec& v) {
  return {R[0] * v.x + R[1] * v.y + R[2] * v.z, R[3] * v.x + R[4] * v.y + R[5] * v.z,
          R[6] * v.x + R[7] * v.y + R[8] * v.z};
}

// Sinusoid mixture over world position; bounded by +-1.
struct Texture {
  struct Component {
    Vec dir;
    real freq, phase, amp;
  };
  std::vector<Component> comps;
  real tint[3];
  real contrast, base;

  explicit Texture(const TextureSpec& spec) {
    Rng rng(spec.seed * 0x9e3779b97f4a7c15ull + 12345);
    real total = 0;
    for (size_t i = 0; i < spec.frequencies.size(); ++i) {
      Component c;
      const real az = rng.uniform(0, 2 * M_PI);
      const real el = rng.uniform(-1.0, 1.0);
      const real r = std::sqrt(1 - el * el);
      c.dir = {r * std::cos(az), el, r * std::sin(az)};
      c.freq = spec.frequencies[i];
      c.phase = rng.uniform(0, 2 * M_PI);
      c.amp = 1.0 / (1.0 + static_cast<real>(i));
      total += c.amp;
      comps.push_back(c);
    }
    for (auto& c : comps) c.amp /= total;
    for (auto& t : tint) t = rng.uniform(0.75, 1.0);
    contrast = spec.contrast;
    base = spec.base_brightness;
  }

  void shade(const Vec& p, real rgb[3]) const {
    real v = 0;
    for (const auto& c : comps) v += c.amp * std::sin(c.freq * c.dir.dot(p) + c.phase);
    const real lum = base * (1.0 + contrast * v);
    for (int c = 0; c < 3; ++c) rgb[c] = std::clamp(lum * tint[c], 0.0, 1.0);
  }
};

struct Hit {
  real t = -1;      // ray parameter == camera-frame depth
  int object = -1;  // plane index, or planes.size()+box index
};

Hit trace_ray(const SceneSpec& spec, const Vec& origin, const Vec& dir, real frame_time) {
  Hit best;
  for (size_t i = 0; i < spec.planes.size(); ++i) {
    const auto& pl = spec.planes[i];
    const Vec n = to_vec(pl.normal);
    const real denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const real t = (pl.offset - n.dot(origin)) / denom;
    if (t > 1e-6 && (best.t < 0 || t < best.t)) {
      best.t = t;
      best.object = static_cast<int>(i);
    }
  }
  for (size_t i = 0; i < spec.boxes.size(); ++i) {
    const auto& bx = spec.boxes[i];
    const Vec c = to_vec(bx.center0) + to_vec(bx.velocity) * frame_time;
    const Vec he = to_vec(bx.half_extent);
    real t0 = -1e30, t1 = 1e30;
    bool miss = false;
    const real o[3] = {origin.x, origin.y, origin.z};
    const real d[3] = {dir.x, dir.y, dir.z};
    const real lo[3] = {c.x - he.x, c.y - he.y, c.z - he.z};
    const real hi[3] = {c.x + he.x, c.y + he.y, c.z + he.z};
    for (int a = 0; a < 3 && !miss; ++a) {
      if (std::abs(d[a]) < 1e-12) {
        if (o[a] < lo[a] || o[a] > hi[a]) miss = true;
        continue;
      }
      real ta = (lo[a] - o[a]) / d[a];
      real tb = (hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) miss = true;
    }
    if (!miss && t1 > 1e-6) {
      const real t = t0 > 1e-6 ? t0 : t1;
      if (best.t < 0 || t < best.t) {
        best.t = t;
        best.object = static_cast<int>(spec.planes.size() + i);
      }
    }
  }
  return best;
}

// Renders the raw (day) radiance plus GT depth and the raw box-hit mask.
void render_frame(const SceneSpec& spec, const CameraIntrinsics& K, int frame, Tensor& image,
                  Tensor& depth, Tensor& box_hit) {
  const PoseSE3& cam = spec.trajectory[static_cast<size_t>(frame)];
  const Vec origin = to_vec(cam.translation);
  std::vector<Texture> plane_tex, box_tex;
  for (const auto& p : spec.planes) plane_tex.emplace_back(p.texture);
  for (const auto& b : spec.boxes) box_tex.emplace_back(b.texture);

  image = Tensor(Shape{3, K.height, K.width});
  depth = Tensor(Shape{K.height, K.width});
  box_hit = Tensor(Shape{K.height, K.width});
  const std::int64_t hw = static_cast<std::int64_t>(K.height) * K.width;
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) {
      const Vec dir_cam{(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0};
      const Vec dir = rotate(cam.rotation, dir_cam);
      const Hit hit = trace_ray(spec, origin, dir, static_cast<real>(frame));
      const std::int64_t off = static_cast<std::int64_t>(v) * K.width + u;
      DASP_CHECK(hit.t > 0, "scene does not cover the full field of view");
      DASP_CHECK(hit.t >= spec.min_depth && hit.t <= spec.max_depth,
                 "scene depth outside configured bounds");
      depth[off] = hit.t;
      const Vec p = origin + dir * hit.t;
      real rgb[3];
      if (hit.object < static_cast<int>(spec.planes.size())) {
        plane_tex[static_cast<size_t>(hit.object)].shade(p, rgb);
      } else {
        const auto& bx = spec.boxes[static_cast<size_t>(hit.object - spec.planes.size())];
        const Vec local = p - (to_vec(bx.center0) + to_vec(bx.velocity) * static_cast<real>(frame));
        box_tex[static_cast<size_t>(hit.object - spec.planes.size())].shade(local, rgb);
        box_hit[off] = 1.0;
      }
      for (int c = 0; c < 3; ++c) image[c * hw + off] = rgb[c];
    }
}

// Projected lamp illumination map for one frame.
Tensor lamp_map(const SceneSpec& spec, const CameraIntrinsics& K, int frame) {
  Tensor lm(Shape{K.height, K.width});
  const PoseSE3 world_to_cam = spec.trajectory[static_cast<size_t>(frame)].inverse();
  for (const auto& lamp : spec.illumination.lamps) {
    const Tensor pc = world_to_cam.apply(lamp.position);
    if (pc[2] < 0.5) continue;
    const real u0 = K.fx * pc[0] / pc[2] + K.cx;
    const real v0 = K.fy * pc[1] / pc[2] + K.cy;
    const real sigma = std::max(1.5, lamp.radius_m * K.fx / pc[2]);
    const int r = static_cast<int>(3 * sigma);
    for (int v = std::max(0, static_cast<int>(v0) - r);
         v <= std::min(K.height - 1, static_cast<int>(v0) + r); ++v)
      for (int u = std::max(0, static_cast<int>(u0) - r);
           u <= std::min(K.width - 1, static_cast<int>(u0) + r); ++u) {
        const real d2 = (u - u0) * (u - u0) + (v - v0) * (v - v0);
        lm.at({v, u}) += lamp.strength * std::exp(-d2 / (2 * sigma * sigma));
      }
  }
  return lm;
}

void apply_night(const SceneSpec& spec, const CameraIntrinsics& K, int frame, Tensor& image,
                 Rng& noise) {
  const Tensor lm = lamp_map(spec, K, frame);
  const std::int64_t hw = static_cast<std::int64_t>(K.height) * K.width;
  const auto& il = spec.illumination;
  for (std::int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) {
      const real day = image[c * hw + p];
      real v = il.gain * std::pow(day, il.gamma) + lm[p] * (0.6 * day + 0.15);
      v += noise.normal(0.0, il.noise_sigma);
      image[c * hw + p] = std::clamp(v, 0.0, 1.0);
    }
}

// Dilate a binary mask by `r` pixels (Chebyshev).
Tensor dilate(const Tensor& m, int r) {
  const int H = m.dim(0), W = m.dim(1);
  Tensor out(Shape{H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      real v = 0;
      for (int di = -r; di <= r && v == 0; ++di)
        for (int dj = -r; dj <= r; ++dj) {
          const int ii = i + di, jj = j + dj;
          if (ii >= 0 && ii < H && jj >= 0 && jj < W && m.at({ii, jj}) > 0) {
            v = 1;
            break;
          }
        }
      out.at({i, j}) = v;
    }
  return out;
}

GeneratedSample render_impl(const SceneSpec& spec, int frames, const CameraIntrinsics& K,
                            bool night) {
  DASP_CHECK(frames >= 1, "need at least one frame");
  DASP_CHECK(static_cast<int>(spec.trajectory.size()) >= frames,
             "trajectory shorter than requested frame count");
  K.validate();

  GeneratedSample out;
  out.domain = night ? "night" : "day";
  out.seed = spec.seed;
  Rng noise(spec.seed ^ 0x9d2c5680aull);

  std::vector<Tensor> box_hits;
  for (int t = 0; t < frames; ++t) {
    Tensor img, depth, hit;
    render_frame(spec, K, t, img, depth, hit);
    if (night) apply_night(spec, K, t, img, noise);
    out.frames.push_back(std::move(img));
    out.gt_depth.push_back(geometry::DepthMap::dense(std::move(depth)));
    box_hits.push_back(std::move(hit));
  }
  // one extra footprint so the last frame's mask covers the next position
  if (!spec.boxes.empty()) {
    Tensor img, depth, hit;
    render_frame(spec, K, frames, img, depth, hit);
    box_hits.push_back(std::move(hit));
  }
  for (int t = 0; t < frames; ++t) {
    Tensor m = box_hits[static_cast<size_t>(t)];
    auto merge = [&m](const Tensor& o) {
      for (std::int64_t i = 0; i < m.numel(); ++i) m[i] = std::max(m[i], o[i]);
    };
    if (t > 0) merge(box_hits[static_cast<size_t>(t - 1)]);
    if (t + 1 < static_cast<int>(box_hits.size())) merge(box_hits[static_cast<size_t>(t + 1)]);
    out.dynamic_mask.push_back(spec.boxes.empty() ? std::move(m) : dilate(m, 2));
  }
  for (int t = 0; t + 1 < frames; ++t) {
    const PoseSE3& a = spec.trajectory[static_cast<size_t>(t)];
    const PoseSE3& b = spec.trajectory[static_cast<size_t>(t + 1)];
    out.gt_pose.push_back(b.inverse().compose(a));  // camera t -> camera t+1
  }
  return out;
}

}  // namespace

void SceneSpec::validate(const CameraIntrinsics& K, int frames) const {
  DASP_CHECK(static_cast<int>(trajectory.size()) >= frames, "trajectory too short");
  for (int t = 0; t < frames; ++t) {
    Tensor img, depth, hit;
    render_frame(*this, K, t, img, depth, hit);  // throws on bad geometry
  }
}

GeneratedSample render_sequence(const SceneSpec& spec, int frames, const CameraIntrinsics& K) {
  return render_impl(spec, frames, K, spec.illumination.night);
}

std::pair<GeneratedSample, GeneratedSample> day_night_pair(const SceneSpec& spec, int frames,
                                                           const CameraIntrinsics& K) {
  GeneratedSample day = render_impl(spec, frames, K, false);
  GeneratedSample night = render_impl(spec, frames, K, true);
  return {std::move(day), std::move(night)};
}

geometry::CameraIntrinsics default_intrinsics(int height, int width) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = 0.6 * width;
  k.fy = 0.6 * width;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  return k;
}

SceneSpec make_default_scene(std::uint64_t seed, const CameraIntrinsics& K) {
  Rng rng(seed * 0x2545f4914f6cdd1dull + 7);
  SceneSpec spec;
  spec.seed = seed;

  // Desk-scale room: depths around 0.2-4 m and camera steps of a few
  // centimeters. At this scale the pose net's 0.01 translation pre-scaling
  // reaches the true motion within a short training budget, and disparities
  // land in the responsive part of the sigmoid for the default depth bounds.
  //
  // One world-space texture shared by every plane: the rendered image and
  // depth stay continuous across plane creases (the room is convex), so the
  // only reprojection discontinuities come from the moving boxes.
  TextureSpec wall_tex;
  wall_tex.seed = rng.next_u64();
  wall_tex.contrast = 0.28;
  wall_tex.base_brightness = 0.5;
  wall_tex.frequencies = {2.4, 5.2, 10.0};

  auto plane = [&](real nx, real ny, real nz, real off) {
    TexturedPlane p;
    p.normal = Tensor(Shape{3}, {nx, ny, nz});
    p.offset = off;
    p.texture = wall_tex;
    return p;
  };
  // ground below, two walls, ceiling, and a backdrop; the room covers the
  // full field of view along the whole trajectory
  spec.planes.push_back(plane(0, 1, 0, 0.2));
  spec.planes.push_back(plane(1, 0, 0, -0.5 - rng.uniform(0, 0.2)));
  spec.planes.push_back(plane(1, 0, 0, 0.5 + rng.uniform(0, 0.2)));
  spec.planes.push_back(plane(0, 1, 0, -0.62));
  spec.planes.push_back(plane(0, 0, 1, 3.25 + rng.uniform(0, 0.5)));

  const int n_boxes = 2;
  for (int i = 0; i < n_boxes; ++i) {
    MovingBox b;
    const real z0 = rng.uniform(0.75, 1.5);
    const real x0 = rng.uniform(-0.28, 0.28);
    const real size = rng.uniform(0.06, 0.11);
    b.center0 = Tensor(Shape{3}, {x0, 0.2 - size, z0});
    b.half_extent = Tensor(Shape{3}, {size, size, size});
    b.velocity = Tensor(Shape{3}, {rng.uniform(-0.022, 0.022), 0.0, rng.uniform(-0.012, 0.02)});
    b.texture.seed = rng.next_u64();
    b.texture.contrast = 0.3;
    b.texture.base_brightness = 0.62;
    b.texture.frequencies = {8.0, 17.0};
    spec.boxes.push_back(std::move(b));
  }

  // forward trajectory with gentle yaw and drift
  const real speed = rng.uniform(0.025, 0.038);
  const real yaw_rate = rng.uniform(-0.0045, 0.0045);
  const real drift = rng.uniform(-0.0025, 0.0025);
  PoseSE3 pose = PoseSE3::identity();
  for (int t = 0; t < 16; ++t) {
    spec.trajectory.push_back(pose);
    PoseSE3 step = PoseSE3::from_axis_angle(
        Tensor(Shape{6}, {0.0, yaw_rate, 0.0, drift, 0.0, speed}));
    pose = pose.compose(step);
  }

  for (int i = 0; i < 4; ++i) {
    Lamp lamp;
    lamp.position = Tensor(Shape{3}, {rng.uniform(-0.38, 0.38), rng.uniform(-0.2, 0.03),
                                      0.5 + 0.7 * i + rng.uniform(0, 0.25)});
    lamp.strength = rng.uniform(0.55, 0.9);
    lamp.radius_m = rng.uniform(0.06, 0.11);
    spec.illumination.lamps.push_back(std::move(lamp));
  }
  return spec;
}

void write_sample(const std::string& dir, const GeneratedSample& sample,
                  const CameraIntrinsics& K) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char name[64];
  for (int t = 0; t < sample.frame_count(); ++t) {
    std::snprintf(name, sizeof(name), "/frame_%02d.ppm", t);
    io::write_ppm16(dir + name, sample.frames[static_cast<size_t>(t)]);
    std::snprintf(name, sizeof(name), "/depth_%02d.bin", t);
    io::write_depth(dir + name, sample.gt_depth[static_cast<size_t>(t)].values);
    std::snprintf(name, sizeof(name), "/mask_%02d.pgm", t);
    io::write_pgm8(dir + name, sample.dynamic_mask[static_cast<size_t>(t)]);
  }
  std::ofstream poses(dir + "/poses.txt");
  poses.precision(17);
  for (const auto& p : sample.gt_pose) {
    const Tensor aa = p.to_axis_angle();
    for (int i = 0; i < 6; ++i) poses << aa[i] << (i == 5 ? "" : " ");
    poses << "\n";
  }
  nlohmann::json manifest;
  manifest["format"] = "dasp-sequence-v1";
  manifest["domain"] = sample.domain;
  manifest["seed"] = sample.seed;
  manifest["frames"] = sample.frame_count();
  manifest["intrinsics"] = {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx},
                            {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
  std::ofstream mf(dir + "/manifest.json");
  mf << manifest.dump(2) << "\n";
  DASP_CHECK(mf.good(), "cannot write manifest in " + dir);
}

GeneratedSample read_sample(const std::string& dir, CameraIntrinsics* k_out) {
  std::ifstream mf(dir + "/manifest.json");
  DASP_CHECK(mf.good(), "missing manifest: " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  DASP_CHECK(manifest.value("format", "") == "dasp-sequence-v1",
             "unknown sequence format in " + dir);
  GeneratedSample out;
  out.domain = manifest["domain"];
  out.seed = manifest["seed"];
  const int frames = manifest["frames"];
  if (k_out) {
    const auto& ki = manifest["intrinsics"];
    k_out->fx = ki["fx"];
    k_out->fy = ki["fy"];
    k_out->cx = ki["cx"];
    k_out->cy = ki["cy"];
    k_out->width = ki["width"];
    k_out->height = ki["height"];
  }
  char name[64];
  for (int t = 0; t < frames; ++t) {
    std::snprintf(name, sizeof(name), "/frame_%02d.ppm", t);
    out.frames.push_back(io::read_ppm16(dir + name));
    std::snprintf(name, sizeof(name), "/depth_%02d.bin", t);
    out.gt_depth.push_back(geometry::DepthMap::dense(io::read_depth(dir + name)));
    std::snprintf(name, sizeof(name), "/mask_%02d.pgm", t);
    out.dynamic_mask.push_back(io::read_pgm8(dir + name));
  }
  std::ifstream poses(dir + "/poses.txt");
  DASP_CHECK(poses.good(), "missing poses.txt: " + dir);
  for (int t = 0; t + 1 < frames; ++t) {
    Tensor aa(Shape{6});
    for (int i = 0; i < 6; ++i) poses >> aa[i];
    DASP_CHECK(poses.good() || poses.eof(), "bad poses.txt: " + dir);
    out.gt_pose.push_back(geometry::PoseSE3::from_axis_angle(aa));
  }
  return out;
}

}  // namespace dasp::synthdata

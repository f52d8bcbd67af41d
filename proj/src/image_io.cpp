#include "dasp/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace dasp::io {

namespace {

std::uint16_t quant16(real v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

void expect(std::istream& is, const std::string& token, const std::string& path) {
  std::string t;
  is >> t;
  DASP_CHECK(is.good() && t == token, "bad image header in " + path);
}

}  // namespace

void write_ppm16(const std::string& path, const Tensor& image) {
  DASP_CHECK(image.ndim() == 3 && image.dim(0) == 3, "write_ppm16 expects [3,H,W]");
  const int h = image.dim(1), w = image.dim(2);
  std::ofstream os(path, std::ios::binary);
  DASP_CHECK(os.good(), "cannot write image: " + path);
  os << "P6\n" << w << " " << h << "\n65535\n";
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (std::int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) {
      const std::uint16_t v = quant16(image[c * hw + p]);
      os.put(static_cast<char>(v >> 8));  // PNM 16-bit is big-endian
      os.put(static_cast<char>(v & 0xff));
    }
  DASP_CHECK(os.good(), "image write failed: " + path);
}

Tensor read_ppm16(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  DASP_CHECK(is.good(), "cannot open image: " + path);
  expect(is, "P6", path);
  int w = 0, h = 0, maxv = 0;
  is >> w >> h >> maxv;
  DASP_CHECK(is.good() && w > 0 && h > 0 && maxv == 65535, "unsupported PPM in " + path);
  is.get();  // single whitespace after header
  Tensor out(Shape{3, h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (std::int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) {
      const int hi = is.get(), lo = is.get();
      DASP_CHECK(hi >= 0 && lo >= 0, "truncated image: " + path);
      out[c * hw + p] = static_cast<real>((hi << 8) | lo) / 65535.0;
    }
  return out;
}

void write_pgm8(const std::string& path, const Tensor& gray) {
  DASP_CHECK(gray.ndim() == 2, "write_pgm8 expects [H,W]");
  const int h = gray.dim(0), w = gray.dim(1);
  std::ofstream os(path, std::ios::binary);
  DASP_CHECK(os.good(), "cannot write image: " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  for (std::int64_t p = 0; p < gray.numel(); ++p)
    os.put(static_cast<char>(std::lround(std::clamp(gray[p], 0.0, 1.0) * 255.0)));
  DASP_CHECK(os.good(), "image write failed: " + path);
}

Tensor read_pgm8(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  DASP_CHECK(is.good(), "cannot open image: " + path);
  expect(is, "P5", path);
  int w = 0, h = 0, maxv = 0;
  is >> w >> h >> maxv;
  DASP_CHECK(is.good() && w > 0 && h > 0 && maxv == 255, "unsupported PGM in " + path);
  is.get();
  Tensor out(Shape{h, w});
  for (std::int64_t p = 0; p < out.numel(); ++p) {
    const int v = is.get();
    DASP_CHECK(v >= 0, "truncated image: " + path);
    out[p] = static_cast<real>(v) / 255.0;
  }
  return out;
}

void write_depth(const std::string& path, const Tensor& depth) {
  DASP_CHECK(depth.ndim() == 2, "write_depth expects [H,W]");
  std::ofstream os(path, std::ios::binary);
  DASP_CHECK(os.good(), "cannot write depth: " + path);
  const std::uint32_t h = static_cast<std::uint32_t>(depth.dim(0));
  const std::uint32_t w = static_cast<std::uint32_t>(depth.dim(1));
  os.write(reinterpret_cast<const char*>(&h), 4);
  os.write(reinterpret_cast<const char*>(&w), 4);
  for (std::int64_t p = 0; p < depth.numel(); ++p) {
    const float v = static_cast<float>(depth[p]);
    os.write(reinterpret_cast<const char*>(&v), 4);
  }
  DASP_CHECK(os.good(), "depth write failed: " + path);
}

Tensor read_depth(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  DASP_CHECK(is.good(), "cannot open depth: " + path);
  std::uint32_t h = 0, w = 0;
  is.read(reinterpret_cast<char*>(&h), 4);
  is.read(reinterpret_cast<char*>(&w), 4);
  DASP_CHECK(is.good() && h > 0 && w > 0, "bad depth header: " + path);
  Tensor out(Shape{static_cast<int>(h), static_cast<int>(w)});
  for (std::int64_t p = 0; p < out.numel(); ++p) {
    float v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    out[p] = v;
  }
  DASP_CHECK(is.good(), "truncated depth: " + path);
  return out;
}

Tensor colormap(const Tensor& gray) {
  DASP_CHECK(gray.ndim() == 2, "colormap expects [H,W]");
  const std::int64_t hw = gray.numel();
  Tensor out(Shape{3, gray.dim(0), gray.dim(1)});
  for (std::int64_t p = 0; p < hw; ++p) {
    const real t = std::clamp(gray[p], 0.0, 1.0);
    // compact turbo-like polynomial ramp
    out[p] = std::clamp(1.6 - std::abs(4.0 * t - 3.4) * 0.8, 0.0, 1.0);
    out[hw + p] = std::clamp(1.5 - std::abs(4.0 * t - 2.0) * 0.7, 0.0, 1.0);
    out[2 * hw + p] = std::clamp(1.6 - std::abs(4.0 * t - 0.6) * 0.8, 0.0, 1.0);
  }
  return out;
}

}  // namespace dasp::io

#pragma once

#include <string>

#include "dasp/tensor.hpp"

namespace dasp::io {

/// 16-bit binary PPM (P6, maxval 65535). image [3,H,W], values clamped to
/// [0,1]. 16 bits keep quantization (~1.5e-5) below the synthetic-data
/// consistency tolerances.
void write_ppm16(const std::string& path, const Tensor& image);
Tensor read_ppm16(const std::string& path);  // -> [3,H,W] in [0,1]

/// 8-bit binary PGM (P5), gray [H,W] in [0,1].
void write_pgm8(const std::string& path, const Tensor& gray);
Tensor read_pgm8(const std::string& path);  // -> [H,W] in [0,1]

/// Flat binary depth file: uint32 H, uint32 W (little-endian), then H*W
/// row-major little-endian float32.
void write_depth(const std::string& path, const Tensor& depth);
Tensor read_depth(const std::string& path);  // -> [H,W]

/// Map gray [H,W] in [0,1] through a turbo-style colormap -> [3,H,W].
Tensor colormap(const Tensor& gray);

}  // namespace dasp::io

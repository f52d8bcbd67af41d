#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dasp/tensor.hpp"

namespace dasp {

/// Deterministic RNG. Uniform and normal draws are implemented directly on the
/// mt19937_64 stream so results do not depend on the standard library's
/// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  real uniform() { return static_cast<real>(gen_() >> 11) * 0x1.0p-53; }

  real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller.
  real normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    real u1 = 0;
    do {
      u1 = uniform();
    } while (u1 <= 0);
    const real u2 = uniform();
    const real r = std::sqrt(-2.0 * std::log(u1));
    const real a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  real normal(real mean, real stddev) { return mean + stddev * normal(); }

  Tensor uniform_tensor(Shape shape, real lo = 0.0, real hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = uniform(lo, hi);
    return t;
  }

  Tensor normal_tensor(Shape shape, real mean = 0.0, real stddev = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = normal(mean, stddev);
    return t;
  }

  /// Derive an independent stream (for per-sequence / per-worker seeding).
  Rng fork(std::uint64_t salt) {
    return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  real spare_ = 0;
};

}  // namespace dasp

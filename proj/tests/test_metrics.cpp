#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dasp/metrics.hpp"
#include "dasp/rng.hpp"

using namespace dasp;
using namespace dasp::metrics;
using geometry::DepthMap;

namespace {

DepthMap dm(std::vector<real> v, int h, int w) {
  return DepthMap::dense(Tensor(Shape{h, w}, std::move(v)));
}

// Independent scalar reference of the whole protocol.
MetricsReport oracle(const DepthMap& pred, const DepthMap& gt, real cap, bool scale_on) {
  std::vector<real> ps, gs;
  for (std::int64_t i = 0; i < gt.values.numel(); ++i) {
    if (gt.valid_mask[i] != 0.0 && gt.values[i] > 0 && gt.values[i] <= cap) {
      ps.push_back(pred.values[i]);
      gs.push_back(gt.values[i]);
    }
  }
  real scale = 1.0;
  if (scale_on) {
    auto med = [](std::vector<real> v) {
      std::sort(v.begin(), v.end());
      const size_t m = v.size() / 2;
      return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    };
    scale = med(gs) / med(ps);
  }
  MetricsReport r;
  r.n_pixels = static_cast<std::int64_t>(ps.size());
  r.max_depth_cap = cap;
  real se = 0, sl = 0;
  for (size_t i = 0; i < ps.size(); ++i) {
    const real p = ps[i] * scale, g = gs[i];
    r.abs_rel += std::abs(p - g) / g;
    r.sq_rel += (p - g) * (p - g) / g;
    se += (p - g) * (p - g);
    sl += std::pow(std::log(p) - std::log(g), 2);
    const real ratio = std::max(p / g, g / p);
    r.delta1 += ratio < 1.25;
    r.delta2 += ratio < 1.5625;
    r.delta3 += ratio < 1.953125;
  }
  const real n = static_cast<real>(ps.size());
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(se / n);
  r.rmse_log = std::sqrt(sl / n);
  r.delta1 /= n;
  r.delta2 /= n;
  r.delta3 /= n;
  return r;
}

}  // namespace

TEST_CASE("perfect prediction: zero errors, unit deltas") {
  Rng rng(3);
  DepthMap gt = DepthMap::dense(rng.uniform_tensor({4, 5}, 1.0, 30.0));
  MetricsReport r = evaluate(gt, gt, 60.0, false);
  CHECK(r.abs_rel == 0.0);
  CHECK(r.sq_rel == 0.0);
  CHECK(r.rmse == 0.0);
  CHECK(r.rmse_log == 0.0);
  CHECK(r.delta1 == 1.0);
  CHECK(r.delta3 == 1.0);
  CHECK(r.n_pixels == 20);
}

TEST_CASE("the 2-pixel hand-computed instance") {
  MetricsReport r = evaluate(dm({1, 2}, 1, 2), dm({2, 2}, 1, 2), 60.0, false);
  CHECK(r.abs_rel == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.rmse == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(r.delta1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.sq_rel == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("median scaling cancels a global factor of 2 bit-exactly") {
  Rng rng(5);
  Tensor base = rng.uniform_tensor({3, 7}, 0.5, 20.0);
  DepthMap gt = DepthMap::dense(rng.uniform_tensor({3, 7}, 1.0, 25.0));
  DepthMap pred = DepthMap::dense(base);
  Tensor doubled = base;
  for (std::int64_t i = 0; i < doubled.numel(); ++i) doubled[i] *= 2.0;
  DepthMap pred2 = DepthMap::dense(doubled);

  MetricsReport a = evaluate(pred, gt, 60.0, true);
  MetricsReport b = evaluate(pred2, gt, 60.0, true);
  CHECK(a.abs_rel == b.abs_rel);
  CHECK(a.rmse == b.rmse);
  CHECK(a.rmse_log == b.rmse_log);
  CHECK(a.delta1 == b.delta1);

  // pred = 2*gt with scaling on is identical to a perfect prediction
  Tensor twice = gt.values;
  for (std::int64_t i = 0; i < twice.numel(); ++i) twice[i] *= 2.0;
  MetricsReport c = evaluate(DepthMap::dense(twice), gt, 60.0, true);
  CHECK(c.abs_rel == 0.0);
  CHECK(c.delta1 == 1.0);

  // arbitrary positive factors cancel to machine precision
  Tensor odd = base;
  for (std::int64_t i = 0; i < odd.numel(); ++i) odd[i] *= 2.7183;
  MetricsReport d = evaluate(DepthMap::dense(odd), gt, 60.0, true);
  CHECK(d.abs_rel == doctest::Approx(a.abs_rel).epsilon(1e-12));
  CHECK(d.rmse_log == doctest::Approx(a.rmse_log).epsilon(1e-12));
}

TEST_CASE("cap and valid-mask handling; shrinking caps never add pixels") {
  Rng rng(7);
  DepthMap gt = DepthMap::dense(rng.uniform_tensor({4, 4}, 1.0, 80.0));
  gt.valid_mask.at({0, 0}) = 0.0;
  gt.values.at({1, 1}) = -1.0;  // non-positive GT is excluded, not an error
  gt.values.at({2, 2}) = 4.0;   // keep at least one pixel under the smallest cap
  gt.values.at({3, 3}) = 6.0;
  DepthMap pred = DepthMap::dense(rng.uniform_tensor({4, 4}, 1.0, 80.0));
  std::int64_t prev = -1;
  for (real cap : {100.0, 60.0, 40.0, 20.0, 10.0}) {
    MetricsReport r = evaluate(pred, gt, cap, true);
    if (prev >= 0) CHECK(r.n_pixels <= prev);
    prev = r.n_pixels;
  }
  // no valid pixels -> error
  DepthMap none = gt;
  none.valid_mask = Tensor::zeros(Shape{4, 4});
  CHECK_THROWS(evaluate(pred, none, 60.0, true));
}

TEST_CASE("agrees with the scalar reference on random small instances") {
  Rng rng(11);
  for (int it = 0; it < 30; ++it) {
    const int h = rng.uniform_int(1, 4), w = rng.uniform_int(1, 4);
    DepthMap gt = DepthMap::dense(rng.uniform_tensor({h, w}, 0.5, 70.0));
    DepthMap pred = DepthMap::dense(rng.uniform_tensor({h, w}, 0.5, 70.0));
    const bool scale_on = it % 2 == 0;
    const real cap = 60.0;
    MetricsReport a = evaluate(pred, gt, cap, scale_on);
    MetricsReport b = oracle(pred, gt, cap, scale_on);
    CHECK(std::abs(a.abs_rel - b.abs_rel) < 1e-9);
    CHECK(std::abs(a.sq_rel - b.sq_rel) < 1e-9);
    CHECK(std::abs(a.rmse - b.rmse) < 1e-9);
    CHECK(std::abs(a.rmse_log - b.rmse_log) < 1e-9);
    CHECK(a.delta1 == b.delta1);
    CHECK(a.delta2 == b.delta2);
    CHECK(a.delta3 == b.delta3);
    a.check_invariants();
  }
}

TEST_CASE("report serialization carries every column") {
  MetricsReport r = evaluate(dm({1, 2}, 1, 2), dm({2, 2}, 1, 2), 60.0, false);
  const std::string line = r.to_line();
  for (const char* key : {"abs_rel=", "sq_rel=", "rmse=", "rmse_log=", "delta1=", "delta2=",
                          "delta3=", "cap=", "n_pixels="})
    CHECK(line.find(key) != std::string::npos);
  const std::string row = r.to_table_row("test");
  CHECK(row.find("0.250") != std::string::npos);
  CHECK(MetricsReport::table_header().find("RMSE log") != std::string::npos);
}

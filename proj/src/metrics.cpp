#include "dasp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace dasp::metrics {

namespace {

real median(std::vector<real> v) {
  DASP_CHECK(!v.empty(), "median of empty set");
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  real m = v[mid];
  if (v.size() % 2 == 0) {
    const real lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = (lo + m) / 2.0;
  }
  return m;
}

}  // namespace

std::string MetricsReport::to_line() const {
  std::ostringstream os;
  os.precision(10);
  os << "abs_rel=" << abs_rel << " sq_rel=" << sq_rel << " rmse=" << rmse
     << " rmse_log=" << rmse_log << " delta1=" << delta1 << " delta2=" << delta2
     << " delta3=" << delta3 << " cap=" << max_depth_cap << " n_pixels=" << n_pixels;
  return os.str();
}

std::string MetricsReport::table_header() {
  return "           |  Abs Rel |   Sq Rel |     RMSE | RMSE log | d<1.25 | d<1.25^2 | d<1.25^3";
}

std::string MetricsReport::to_table_row(const std::string& label) const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%10s | %8.3f | %8.3f | %8.3f | %8.3f | %6.3f | %8.3f | %8.3f",
                label.c_str(), abs_rel, sq_rel, rmse, rmse_log, delta1, delta2, delta3);
  return buf;
}

void MetricsReport::check_invariants() const {
  DASP_CHECK(delta1 <= delta2 + 1e-12 && delta2 <= delta3 + 1e-12, "delta ordering violated");
  DASP_CHECK(delta1 >= 0 && delta3 <= 1.0 + 1e-12, "deltas must lie in [0,1]");
  DASP_CHECK(abs_rel >= 0 && sq_rel >= 0 && rmse >= 0 && rmse_log >= 0, "errors must be >= 0");
}

MetricsReport evaluate(const geometry::DepthMap& pred, const geometry::DepthMap& gt,
                       real max_depth, bool median_scale) {
  DASP_CHECK(pred.values.same_shape(gt.values), "evaluate: shape mismatch");
  DASP_CHECK(max_depth > 0, "evaluate: max_depth must be positive");

  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < gt.values.numel(); ++i) {
    if (gt.valid_mask[i] == 0.0) continue;
    const real g = gt.values[i];
    if (g <= 0 || g > max_depth) continue;
    idx.push_back(i);
  }
  DASP_CHECK(!idx.empty(), "evaluate: no valid ground-truth pixels under the cap");

  real scale = 1.0;
  if (median_scale) {
    std::vector<real> gv, pv;
    gv.reserve(idx.size());
    pv.reserve(idx.size());
    for (auto i : idx) {
      gv.push_back(gt.values[i]);
      pv.push_back(pred.values[i]);
    }
    scale = median(std::move(gv)) / median(std::move(pv));
  }

  MetricsReport r;
  r.max_depth_cap = max_depth;
  r.n_pixels = static_cast<std::int64_t>(idx.size());
  real sq_err = 0, log_err = 0;
  for (auto i : idx) {
    const real p = pred.values[i] * scale;
    const real g = gt.values[i];
    DASP_CHECK(p > 0, "evaluate: prediction must be positive");
    r.abs_rel += std::abs(p - g) / g;
    r.sq_rel += (p - g) * (p - g) / g;
    sq_err += (p - g) * (p - g);
    const real le = std::log(p) - std::log(g);
    log_err += le * le;
    const real ratio = std::max(p / g, g / p);
    r.delta1 += ratio < 1.25 ? 1 : 0;
    r.delta2 += ratio < 1.25 * 1.25 ? 1 : 0;
    r.delta3 += ratio < 1.25 * 1.25 * 1.25 ? 1 : 0;
  }
  const real n = static_cast<real>(idx.size());
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(sq_err / n);
  r.rmse_log = std::sqrt(log_err / n);
  r.delta1 /= n;
  r.delta2 /= n;
  r.delta3 /= n;
  r.check_invariants();
  return r;
}

}  // namespace dasp::metrics

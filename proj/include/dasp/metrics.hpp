#pragma once

#include <cstdint>
#include <string>

#include "dasp/geometry.hpp"

namespace dasp::metrics {

struct MetricsReport {
  real abs_rel = 0;
  real sq_rel = 0;
  real rmse = 0;
  real rmse_log = 0;
  real delta1 = 0;
  real delta2 = 0;
  real delta3 = 0;
  real max_depth_cap = 0;
  std::int64_t n_pixels = 0;

  /// key=value single-line record.
  std::string to_line() const;
  /// Row in Table-1 column order (Abs Rel, Sq Rel, RMSE, RMSE log, deltas).
  std::string to_table_row(const std::string& label) const;
  static std::string table_header();

  void check_invariants() const;
};

/// Seven-metric protocol. GT pixels outside (0, max_depth] or outside the
/// valid mask are skipped. With median_scale, pred is globally rescaled by
/// median(gt)/median(pred) over the evaluated pixels first.
MetricsReport evaluate(const geometry::DepthMap& pred, const geometry::DepthMap& gt,
                       real max_depth, bool median_scale);

}  // namespace dasp::metrics

#include "dasp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dasp {

void fail(const std::string& msg) { throw std::runtime_error("dasp: " + msg); }

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    DASP_CHECK(d >= 0, "negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::int64_t Tensor::offset(std::initializer_list<int> idx) const {
  DASP_CHECK(static_cast<int>(idx.size()) == ndim(), "index rank mismatch for " + shape_str(shape_));
  std::int64_t off = 0;
  int k = 0;
  for (int i : idx) {
    off = off * shape_[static_cast<size_t>(k)] + i;
    ++k;
  }
  return off;
}

real Tensor::min() const {
  DASP_CHECK(!empty(), "min() on empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

real Tensor::max() const {
  DASP_CHECK(!empty(), "max() on empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

real Tensor::sum() const {
  real s = 0;
  for (real v : data_) s += v;
  return s;
}

real Tensor::abs_max() const {
  real m = 0;
  for (real v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::all_finite() const {
  for (real v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
  DASP_CHECK(a.same_shape(b), "max_abs_diff shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  real m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace dasp

#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dasp {

using real = double;
using Shape = std::vector<int>;

[[noreturn]] void fail(const std::string& msg);

#define DASP_CHECK(cond, msg) \
  do {                        \
    if (!(cond)) ::dasp::fail(msg); \
  } while (0)

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

/// Dense row-major tensor of doubles. Value semantics; moves are cheap.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}
  Tensor(Shape shape, std::vector<real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    DASP_CHECK(static_cast<std::int64_t>(data_.size()) == shape_numel(shape_),
               "tensor data size does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, real v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(real v) { return Tensor(Shape{1}, {v}); }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i < 0 ? i + ndim() : i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  real& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  real operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Multi-index access, row-major.
  real& at(std::initializer_list<int> idx) { return data_[static_cast<size_t>(offset(idx))]; }
  real at(std::initializer_list<int> idx) const { return data_[static_cast<size_t>(offset(idx))]; }

  real item() const {
    DASP_CHECK(numel() == 1, "item() requires a single-element tensor, got " + shape_str(shape_));
    return data_[0];
  }

  Tensor reshaped(Shape s) const& {
    DASP_CHECK(shape_numel(s) == numel(), "reshape " + shape_str(shape_) + " -> " + shape_str(s));
    return Tensor(std::move(s), data_);
  }
  Tensor reshaped(Shape s) && {
    DASP_CHECK(shape_numel(s) == numel(), "reshape " + shape_str(shape_) + " -> " + shape_str(s));
    return Tensor(std::move(s), std::move(data_));
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  real min() const;
  real max() const;
  real sum() const;
  real mean() const { return numel() ? sum() / static_cast<real>(numel()) : 0.0; }
  real abs_max() const;
  bool all_finite() const;

 private:
  std::int64_t offset(std::initializer_list<int> idx) const;

  Shape shape_;
  std::vector<real> data_;
};

/// Max |a-b| over all elements; shapes must match.
real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dasp

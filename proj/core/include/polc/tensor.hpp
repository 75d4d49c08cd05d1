#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "polc/common.hpp"
#include "polc/rng.hpp"

namespace polc {

// Dense row-major double tensor. Double precision everywhere: training runs at
// desk scale and the loss stack is verified against float64 finite differences.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }
  static Tensor from(std::vector<int> shape, std::vector<double> data) {
    Tensor t;
    POLC_CHECK(count(shape) == static_cast<std::int64_t>(data.size()), "tensor data/shape mismatch");
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = stddev * rng.normal();
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Slow indexed accessor, intended for tests and setup code.
  double& at(std::initializer_list<int> idx);
  double at(std::initializer_list<int> idx) const;

  Tensor reshaped(std::vector<int> shape) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  double min() const;
  double max() const;
  double sum() const;

  static std::int64_t count(const std::vector<int>& shape);
  static std::string shape_str(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::uint64_t tensor_hash(const Tensor& t, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace polc

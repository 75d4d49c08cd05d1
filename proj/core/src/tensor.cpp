#include "polc/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace polc {

std::int64_t Tensor::count(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    POLC_CHECK(d >= 0, "negative tensor dimension");
    n *= d;
  }
  return n;
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

namespace {
std::int64_t flat_index(const std::vector<int>& shape, std::initializer_list<int> idx) {
  POLC_CHECK(idx.size() == shape.size(), "tensor index rank mismatch");
  std::int64_t flat = 0;
  std::size_t k = 0;
  for (int i : idx) {
    POLC_CHECK(i >= 0 && i < shape[k], "tensor index out of range");
    flat = flat * shape[k] + i;
    ++k;
  }
  return flat;
}
}  // namespace

double& Tensor::at(std::initializer_list<int> idx) { return data_[static_cast<std::size_t>(flat_index(shape_, idx))]; }

double Tensor::at(std::initializer_list<int> idx) const { return data_[static_cast<std::size_t>(flat_index(shape_, idx))]; }

Tensor Tensor::reshaped(std::vector<int> shape) const {
  POLC_CHECK(count(shape) == size(), "reshape element count mismatch");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : data_) m = v < m ? v : m;
  return m;
}

double Tensor::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data_) m = v > m ? v : m;
  return m;
}

double Tensor::sum() const {
  double s = 0;
  for (double v : data_) s += v;
  return s;
}

std::uint64_t tensor_hash(const Tensor& t, std::uint64_t h) {
  int nd = t.ndim();
  h = fnv1a(&nd, sizeof nd, h);
  for (int i = 0; i < nd; ++i) {
    int d = t.dim(i);
    h = fnv1a(&d, sizeof d, h);
  }
  return fnv1a(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double), h);
}

}  // namespace polc

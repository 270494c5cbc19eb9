#include "midistyle/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace midistyle {

void Tensor::reshape(std::vector<int64_t> shape) {
  // rank 0 is the empty tensor, so serialized round trips preserve size
  int64_t n = shape.empty() ? 0 : 1;
  for (int64_t d : shape) {
    require(d >= 0, errc::invalid_argument, "negative tensor dimension");
    n *= d;
  }
  shape_ = std::move(shape);
  data_.assign(static_cast<size_t>(n), 0.0);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

void Tensor::fill(double value) {
  std::fill(data_.begin(), data_.end(), value);
}

void Tensor::add(const Tensor& other) {
  check_same_shape(*this, other, "Tensor::add");
  const double* src = other.data();
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += src[i];
}

void Tensor::add_scaled(const Tensor& other, double s) {
  check_same_shape(*this, other, "Tensor::add_scaled");
  const double* src = other.data();
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += s * src[i];
}

void Tensor::scale(double s) {
  for (double& v : data_) v *= s;
}

double Tensor::sum() const {
  double acc = 0.0;
  for (double v : data_) acc += v;
  return acc;
}

double Tensor::min() const {
  require(!data_.empty(), errc::invalid_argument, "min of empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const {
  require(!data_.empty(), errc::invalid_argument, "max of empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace midistyle

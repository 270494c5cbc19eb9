#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <vector>

#include "midistyle/errors.hpp"

namespace midistyle {

// Allocator pinning every buffer to one cache-line alignment. Vectorized
// kernels (Eigen's GEMM in particular) pick code paths based on pointer
// alignment; a fixed alignment keeps results bit-identical across runs
// regardless of heap layout, which the reproducibility guarantees
// (identical training logs and checkpoints for identical seeds) rely on.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(
        ::operator new(n * sizeof(T), std::align_val_t(kAlign)));
  }
  void deallocate(T* p, std::size_t) {
    ::operator delete(p, std::align_val_t(kAlign));
  }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

// Dense row-major tensor of doubles. Network activations use the NCHW
// layout (samples, channels, rows, columns); lower-rank uses (vectors,
// matrices) index the trailing dimensions the same way.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape) { reshape(std::move(shape)); }

  static Tensor zeros(std::vector<int64_t> shape) {
    return Tensor(std::move(shape));
  }
  static Tensor full(std::vector<int64_t> shape, double value);

  void reshape(std::vector<int64_t> shape);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(size_t i) const { return shape_.at(i); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // NCHW accessors
  double& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) *
                                         shape_[3] +
                                     w)];
  }
  double at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) *
                                         shape_[3] +
                                     w)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(double value);
  void add(const Tensor& other);          // this += other
  void add_scaled(const Tensor& other, double s);  // this += s * other
  void scale(double s);
  double sum() const;
  double min() const;
  double max() const;
  bool all_finite() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* what) {
  require(a.same_shape(b), errc::shape_mismatch, what);
}

}  // namespace midistyle

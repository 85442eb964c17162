#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lphom/rng.hpp"

namespace lphom {

using Shape = std::vector<int>;

// Cache-line aligned allocation. Vectorized reductions peel a scalar prefix up
// to the first aligned element, so a fixed alignment keeps their summation
// order, and hence results, independent of where the heap places a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array. NCHW for images and latents, OIHW for conv kernels.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, AlignedVector<T> data);
  BasicTensor(Shape shape, const std::vector<T>& data)
      : BasicTensor(std::move(shape), AlignedVector<T>(data.begin(), data.end())) {}

  static BasicTensor randn(Shape shape, Rng& rng, T stddev = T(1));
  static BasicTensor uniform(Shape shape, Rng& rng, T lo, T hi);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  AlignedVector<T>& storage() { return data_; }
  const AlignedVector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Same data, new shape of equal element count.
  BasicTensor reshaped(Shape shape) const;

  // Copy of item n along the leading axis, keeping a leading axis of 1.
  BasicTensor item(int n) const;

  template <typename U>
  BasicTensor<U> cast() const {
    AlignedVector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  // Throws NumericError naming `where` if any element is NaN or infinite.
  void check_finite(std::string_view where) const;

  bool operator==(const BasicTensor& other) const = default;

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Stacks tensors of identical shape (each with a leading 1) along axis 0.
template <typename T>
BasicTensor<T> stack_batch(std::span<const BasicTensor<T>> items);

}  // namespace lphom

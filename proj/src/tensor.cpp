#include "lphom/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <type_traits>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "lphom/errors.hpp"

namespace lphom {

namespace {

#if defined(__GLIBC__)
// Activation buffers are allocated and freed every step. Keeping them on the
// heap instead of fresh mmap pages avoids a page-fault storm per step.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 512 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, AlignedVector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_str(shape_));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::randn(Shape shape, Rng& rng, T stddev) {
  BasicTensor out(std::move(shape));
  for (auto& v : out.data_) v = static_cast<T>(rng.normal()) * stddev;
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(Shape shape, Rng& rng, T lo, T hi) {
  BasicTensor out(std::move(shape));
  for (auto& v : out.data_) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::item(int n) const {
  if (rank() < 1 || n < 0 || n >= shape_[0]) {
    throw ShapeError("item " + std::to_string(n) + " out of range for " + shape_str(shape_));
  }
  Shape s = shape_;
  s[0] = 1;
  const std::size_t stride = data_.size() / static_cast<std::size_t>(shape_[0]);
  std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(n * stride),
                     data_.begin() + static_cast<std::ptrdiff_t>((n + 1) * stride));
  return BasicTensor(std::move(s), std::move(out));
}

template <typename T>
void BasicTensor<T>::check_finite(std::string_view where) const {
  // Fast path: look for an all-ones exponent field without branching.
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits kExp = static_cast<Bits>(sizeof(T) == 4 ? 0x7f800000ull : 0x7ff0000000000000ull);
  Bits hit = 0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    Bits b;
    std::memcpy(&b, &data_[i], sizeof(T));
    hit |= static_cast<Bits>((b & kExp) == kExp);
  }
  if (!hit) return;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      std::ostringstream os;
      os << "non-finite value " << data_[i] << " at index " << i << " in " << where
         << " output " << shape_str(shape_);
      throw NumericError(os.str());
    }
  }
}

template <typename T>
BasicTensor<T> stack_batch(std::span<const BasicTensor<T>> items) {
  if (items.empty()) throw ShapeError("stack_batch of zero tensors");
  Shape s = items[0].shape();
  if (s.empty() || s[0] != 1) throw ShapeError("stack_batch expects leading dim 1, got " + shape_str(s));
  AlignedVector<T> data;
  data.reserve(items[0].size() * items.size());
  for (const auto& t : items) {
    if (t.shape() != items[0].shape()) {
      throw ShapeError("stack_batch shape mismatch: " + shape_str(t.shape()) + " vs " +
                       shape_str(items[0].shape()));
    }
    data.insert(data.end(), t.storage().begin(), t.storage().end());
  }
  s[0] = static_cast<int>(items.size());
  return BasicTensor<T>(std::move(s), std::move(data));
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template BasicTensor<float> stack_batch(std::span<const BasicTensor<float>>);
template BasicTensor<double> stack_batch(std::span<const BasicTensor<double>>);

}  // namespace lphom

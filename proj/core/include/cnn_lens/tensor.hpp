#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cnn_lens {

struct Shape3 {
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  constexpr std::size_t size() const noexcept { return channels * rows * cols; }
  constexpr std::size_t plane() const noexcept { return rows * cols; }
  friend constexpr bool operator==(const Shape3&, const Shape3&) = default;
};

/// Dense channels x rows x cols grid of 32-bit reals, channel-major then
/// row-major. Immutable once constructed; every value is finite.
class Tensor3D {
 public:
  /// Throws ConfigError on a zero dimension, a length mismatch or a
  /// non-finite value.
  Tensor3D(Shape3 shape, std::vector<float> data);

  static Tensor3D zeros(Shape3 shape);

  const Shape3& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t rows() const noexcept { return shape_.rows; }
  std::size_t cols() const noexcept { return shape_.cols; }
  std::size_t size() const noexcept { return data_.size(); }

  /// Bounds-checked read; throws IndexError.
  float at(std::size_t c, std::size_t r, std::size_t k) const;

  float operator()(std::size_t c, std::size_t r, std::size_t k) const noexcept {
    return data_[(c * shape_.rows + r) * shape_.cols + k];
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> channel(std::size_t c) const;

  /// Copy of one channel as a 1 x rows x cols tensor.
  Tensor3D channel_tensor(std::size_t c) const;

 private:
  Shape3 shape_;
  std::vector<float> data_;
};

/// Flat sequence of 32-bit reals (flatten output, logits, probabilities).
class Vector1D {
 public:
  explicit Vector1D(std::vector<float> data);

  std::size_t size() const noexcept { return data_.size(); }
  float at(std::size_t i) const;
  float operator[](std::size_t i) const noexcept { return data_[i]; }
  std::span<const float> data() const noexcept { return data_; }

 private:
  std::vector<float> data_;
};

Tensor3D make_tensor(std::size_t channels, std::size_t rows, std::size_t cols,
                     std::vector<float> data);

/// True iff shapes match and max |a - b| <= tol.
bool approx_equal(const Tensor3D& a, const Tensor3D& b, float tol);
bool approx_equal(const Vector1D& a, const Vector1D& b, float tol);

/// Largest elementwise |a - b|; throws ConfigError on shape mismatch.
float max_abs_diff(std::span<const float> a, std::span<const float> b);

/// Exact bit pattern equality (distinguishes -0 from +0).
bool bitwise_equal(std::span<const float> a, std::span<const float> b);

}  // namespace cnn_lens

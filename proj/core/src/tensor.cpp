#include "cnn_lens/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "cnn_lens/errors.hpp"

namespace cnn_lens {
namespace {

void require_finite(std::span<const float> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ConfigError("non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace

Tensor3D::Tensor3D(Shape3 shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape_.channels == 0 || shape_.rows == 0 || shape_.cols == 0) {
    throw ConfigError("tensor dimensions must be positive");
  }
  if (data_.size() != shape_.size()) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + std::to_string(shape_.channels) +
                      "x" + std::to_string(shape_.rows) + "x" +
                      std::to_string(shape_.cols));
  }
  require_finite(data_);
}

Tensor3D Tensor3D::zeros(Shape3 shape) {
  return Tensor3D(shape, std::vector<float>(shape.size(), 0.0f));
}

float Tensor3D::at(std::size_t c, std::size_t r, std::size_t k) const {
  if (c >= shape_.channels || r >= shape_.rows || k >= shape_.cols) {
    throw IndexError("index (" + std::to_string(c) + "," + std::to_string(r) +
                     "," + std::to_string(k) + ") out of range");
  }
  return (*this)(c, r, k);
}

std::span<const float> Tensor3D::channel(std::size_t c) const {
  if (c >= shape_.channels) {
    throw IndexError("channel " + std::to_string(c) + " out of range");
  }
  return std::span<const float>(data_).subspan(c * shape_.plane(), shape_.plane());
}

Tensor3D Tensor3D::channel_tensor(std::size_t c) const {
  auto plane = channel(c);
  return Tensor3D({1, shape_.rows, shape_.cols},
                  std::vector<float>(plane.begin(), plane.end()));
}

Vector1D::Vector1D(std::vector<float> data) : data_(std::move(data)) {
  if (data_.empty()) throw ConfigError("vector length must be positive");
  require_finite(data_);
}

float Vector1D::at(std::size_t i) const {
  if (i >= data_.size()) {
    throw IndexError("index " + std::to_string(i) + " out of range");
  }
  return data_[i];
}

Tensor3D make_tensor(std::size_t channels, std::size_t rows, std::size_t cols,
                     std::vector<float> data) {
  return Tensor3D({channels, rows, cols}, std::move(data));
}

float max_abs_diff(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ConfigError("length mismatch in comparison");
  float worst = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a[i] - b[i]));
  }
  return worst;
}

bool approx_equal(const Tensor3D& a, const Tensor3D& b, float tol) {
  if (a.shape() != b.shape()) return false;
  return max_abs_diff(a.data(), b.data()) <= tol;
}

bool approx_equal(const Vector1D& a, const Vector1D& b, float tol) {
  if (a.size() != b.size()) return false;
  return max_abs_diff(a.data(), b.data()) <= tol;
}

bool bitwise_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

}  // namespace cnn_lens

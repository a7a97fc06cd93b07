#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cnn_lens/tensor.hpp"

namespace cnn_lens {

inline constexpr std::size_t kInputSide = 64;

/// 8-bit RGB raster, row-major triples.
class RgbImage {
 public:
  /// Throws ConfigError on a zero dimension or a pixel-count mismatch.
  RgbImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  std::array<std::uint8_t, 3> pixel(std::size_t x, std::size_t y) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> pixels_;
};

/// Per-channel affine map applied after scaling pixels to [0, 1]:
/// value = (pixel / 255 - mean[c]) / stddev[c]. Defaults are the identity.
struct Normalization {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};

  bool is_identity() const noexcept;
  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Decodes PNG or JPEG (sniffed from the signature). Alpha is composited
/// over white. Throws DecodeError on anything else.
RgbImage decode_image(std::span<const std::uint8_t> bytes);

/// Central square of side min(width, height); odd leftovers are trimmed from
/// the right/bottom.
RgbImage center_crop_square(const RgbImage& img);

/// Bilinear resample of a square image to side x side. Sample positions are
/// corner-aligned, so corner pixels map onto corner pixels.
RgbImage resize_square(const RgbImage& img, std::size_t side);
RgbImage resize_to_64(const RgbImage& img);

/// 3 x 64 x 64 tensor in R, G, B channel order.
Tensor3D to_input_tensor(const RgbImage& img, const Normalization& norm = {});

/// decode -> crop -> resize -> tensorize.
Tensor3D image_to_input(std::span<const std::uint8_t> bytes, const Normalization& norm = {});

/// Encoders for fixtures and exports. `channels` is 1 (gray), 2 (gray+alpha),
/// 3 (RGB) or 4 (RGBA) for PNG and 1 or 3 for JPEG.
std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height,
                                     std::size_t channels,
                                     std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> encode_jpeg(std::size_t width, std::size_t height,
                                      std::size_t channels,
                                      std::span<const std::uint8_t> pixels,
                                      int quality = 90);

}  // namespace cnn_lens

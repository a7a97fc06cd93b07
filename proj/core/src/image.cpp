#include "cnn_lens/image.hpp"

#include <cstdio>

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdlib>
#include <cstring>
#include <string>

#include "cnn_lens/errors.hpp"

namespace cnn_lens {
namespace {

// Rejects rasters whose decoded size would be unreasonable for an upload.
constexpr std::size_t kMaxPixels = std::size_t{1} << 28;

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t sig[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= sizeof sig && std::memcmp(b.data(), sig, sizeof sig) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

std::uint8_t over_white(std::uint8_t value, std::uint8_t alpha) {
  const unsigned blended = value * alpha + 255u * (255u - alpha);
  return static_cast<std::uint8_t>((blended + 127u) / 255u);
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string why = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + why);
  }
  if (std::size_t{image.width} * image.height > kMaxPixels) {
    png_image_free(&image);
    throw DecodeError("png: image too large");
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    std::string why = image.message;
    png_image_free(&image);
    throw DecodeError("png: " + why);
  }
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  png_image_free(&image);

  std::vector<std::uint8_t> rgb(w * h * 3);
  for (std::size_t i = 0; i < w * h; ++i) {
    const std::uint8_t a = rgba[i * 4 + 3];
    for (std::size_t c = 0; c < 3; ++c) rgb[i * 3 + c] = over_white(rgba[i * 4 + c], a);
  }
  return RgbImage(w, h, std::move(rgb));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr) {}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct info;
  JpegErrorManager err;
  std::vector<std::uint8_t> rgb;
  std::size_t w = 0;
  std::size_t h = 0;

  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_silent;
  err.message[0] = '\0';

  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw DecodeError(std::string("jpeg: ") + err.message);
  }

  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&info, TRUE);
  if (info.jpeg_color_space == JCS_CMYK || info.jpeg_color_space == JCS_YCCK) {
    jpeg_destroy_decompress(&info);
    throw DecodeError("jpeg: CMYK images are not supported");
  }
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  w = info.output_width;
  h = info.output_height;
  if (w * h > kMaxPixels || info.output_components != 3) {
    jpeg_destroy_decompress(&info);
    throw DecodeError("jpeg: unsupported dimensions or components");
  }
  rgb.resize(w * h * 3);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = rgb.data() + std::size_t{info.output_scanline} * w * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return RgbImage(w, h, std::move(rgb));
}

}  // namespace

RgbImage::RgbImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width_ == 0 || height_ == 0) throw ConfigError("image dimensions must be positive");
  if (pixels_.size() != width_ * height_ * 3) {
    throw ConfigError("image has " + std::to_string(pixels_.size()) + " bytes, expected " +
                      std::to_string(width_ * height_ * 3));
  }
}

std::array<std::uint8_t, 3> RgbImage::pixel(std::size_t x, std::size_t y) const {
  if (x >= width_ || y >= height_) throw IndexError("pixel outside image");
  const std::size_t i = (y * width_ + x) * 3;
  return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
}

bool Normalization::is_identity() const noexcept {
  return *this == Normalization{};
}

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw DecodeError("unsupported image format (expected PNG or JPEG)");
}

RgbImage center_crop_square(const RgbImage& img) {
  const std::size_t side = std::min(img.width(), img.height());
  if (img.width() == img.height()) return img;
  const std::size_t x0 = (img.width() - side) / 2;
  const std::size_t y0 = (img.height() - side) / 2;
  std::vector<std::uint8_t> out(side * side * 3);
  const auto src = img.pixels();
  for (std::size_t y = 0; y < side; ++y) {
    const auto* row = src.data() + ((y0 + y) * img.width() + x0) * 3;
    std::copy(row, row + side * 3, out.begin() + static_cast<std::ptrdiff_t>(y * side * 3));
  }
  return RgbImage(side, side, std::move(out));
}

RgbImage resize_square(const RgbImage& img, std::size_t side) {
  if (img.width() != img.height()) throw ConfigError("resize expects a square image");
  if (side == 0) throw ConfigError("target side must be positive");
  const std::size_t src_side = img.width();
  if (src_side == side) return img;

  // Source coordinate for each destination index, corner-aligned.
  struct Tap {
    std::size_t lo;
    std::size_t hi;
    double frac;
  };
  std::vector<Tap> taps(side);
  for (std::size_t d = 0; d < side; ++d) {
    const double pos = side == 1 ? (src_side - 1) / 2.0
                                 : static_cast<double>(d) * static_cast<double>(src_side - 1) /
                                       static_cast<double>(side - 1);
    const auto lo = std::min(static_cast<std::size_t>(pos), src_side - 1);
    taps[d] = {lo, std::min(lo + 1, src_side - 1), pos - static_cast<double>(lo)};
  }

  const auto src = img.pixels();
  auto at = [&](std::size_t x, std::size_t y, std::size_t c) -> double {
    return src[(y * src_side + x) * 3 + c];
  };
  std::vector<std::uint8_t> out(side * side * 3);
  for (std::size_t y = 0; y < side; ++y) {
    const Tap& ty = taps[y];
    for (std::size_t x = 0; x < side; ++x) {
      const Tap& tx = taps[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = at(tx.lo, ty.lo, c) * (1.0 - tx.frac) + at(tx.hi, ty.lo, c) * tx.frac;
        const double bottom =
            at(tx.lo, ty.hi, c) * (1.0 - tx.frac) + at(tx.hi, ty.hi, c) * tx.frac;
        const double v = top * (1.0 - ty.frac) + bottom * ty.frac;
        out[(y * side + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return RgbImage(side, side, std::move(out));
}

RgbImage resize_to_64(const RgbImage& img) { return resize_square(img, kInputSide); }

Tensor3D to_input_tensor(const RgbImage& img, const Normalization& norm) {
  if (img.width() != kInputSide || img.height() != kInputSide) {
    throw ConfigError("input image must be 64x64, got " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()));
  }
  constexpr std::size_t plane = kInputSide * kInputSide;
  std::vector<float> data(3 * plane);
  const auto px = img.pixels();
  const bool identity = norm.is_identity();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      float v = static_cast<float>(px[i * 3 + c]) / 255.0f;
      if (!identity) v = (v - norm.mean[c]) / norm.stddev[c];
      data[c * plane + i] = v;
    }
  }
  return Tensor3D({3, kInputSide, kInputSide}, std::move(data));
}

Tensor3D image_to_input(std::span<const std::uint8_t> bytes, const Normalization& norm) {
  return to_input_tensor(resize_to_64(center_crop_square(decode_image(bytes))), norm);
}

std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height,
                                     std::size_t channels,
                                     std::span<const std::uint8_t> pixels) {
  static constexpr png_uint_32 formats[] = {PNG_FORMAT_GRAY, PNG_FORMAT_GA, PNG_FORMAT_RGB,
                                            PNG_FORMAT_RGBA};
  if (channels < 1 || channels > 4) throw ConfigError("png: channels must be 1..4");
  if (width == 0 || height == 0 || pixels.size() != width * height * channels) {
    throw ConfigError("png: pixel buffer does not match dimensions");
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = formats[channels - 1];

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(std::string("png: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw Error(std::string("png: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(std::size_t width, std::size_t height,
                                      std::size_t channels,
                                      std::span<const std::uint8_t> pixels, int quality) {
  if (channels != 1 && channels != 3) throw ConfigError("jpeg: channels must be 1 or 3");
  if (width == 0 || height == 0 || pixels.size() != width * height * channels) {
    throw ConfigError("jpeg: pixel buffer does not match dimensions");
  }
  jpeg_compress_struct info;
  JpegErrorManager err;
  unsigned char* buffer = nullptr;
  unsigned long size = 0;

  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_silent;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&info);
    std::free(buffer);
    throw Error(std::string("jpeg: ") + err.message);
  }
  jpeg_create_compress(&info);
  jpeg_mem_dest(&info, &buffer, &size);
  info.image_width = static_cast<JDIMENSION>(width);
  info.image_height = static_cast<JDIMENSION>(height);
  info.input_components = static_cast<int>(channels);
  info.in_color_space = channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&info);
  jpeg_set_quality(&info, quality, TRUE);
  jpeg_start_compress(&info, TRUE);
  while (info.next_scanline < info.image_height) {
    auto* row = const_cast<JSAMPLE*>(pixels.data() +
                                     std::size_t{info.next_scanline} * width * channels);
    jpeg_write_scanlines(&info, &row, 1);
  }
  jpeg_finish_compress(&info);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  jpeg_destroy_compress(&info);
  std::free(buffer);
  return out;
}

}  // namespace cnn_lens

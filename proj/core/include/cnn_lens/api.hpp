#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cnn_lens/errors.hpp"
#include "cnn_lens/model.hpp"

namespace cnn_lens {

/// The three client calls shared by the HTTP service and the embedded C
/// boundary. Every response is a UTF-8 JSON document; equal requests give
/// byte-identical responses. Immutable after construction.
class Engine {
 public:
  /// `preset_dir` may be empty; otherwise every *.png / *.jpg inside it is
  /// served as a preset whose id is the file stem.
  explicit Engine(Model model, const std::filesystem::path& preset_dir = {});

  const Model& model() const noexcept { return model_; }

  /// Architecture, class labels, fingerprint and preset ids.
  std::string model_info() const;

  /// serialize_trace(forward(...)) of an uploaded PNG/JPEG.
  std::string classify_image(std::span<const std::uint8_t> bytes) const;

  /// Same, for a bundled preset. Throws UnknownPresetError.
  std::string classify_preset(std::string_view id) const;

  std::vector<std::string> preset_ids() const;

  /// Hyperparameter calculator: {"in", "kernel", "stride", "padding"} ->
  /// shape report plus sliding-step coordinate list. Throws ConfigError.
  static std::string conv_demo(std::string_view request_json);

 private:
  Model model_;
  std::map<std::string, std::vector<std::uint8_t>, std::less<>> presets_;
};

class UnknownPresetError : public Error {
 public:
  explicit UnknownPresetError(std::string_view id)
      : Error("unknown preset '" + std::string(id) + "'") {}
};

/// Upper bound on `in`, `kernel` and `padding` accepted by conv_demo.
inline constexpr std::size_t kConvDemoMaxSide = 512;

}  // namespace cnn_lens

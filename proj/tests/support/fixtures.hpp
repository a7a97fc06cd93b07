#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "cnn_lens/model.hpp"

namespace fixtures {

inline std::filesystem::path assets() { return CNN_LENS_TEST_ASSETS; }
inline std::filesystem::path reference_weights() { return assets() / "reference_weights.json"; }
inline std::filesystem::path presets() { return assets() / "presets"; }

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline const cnn_lens::Model& reference_model() {
  static const cnn_lens::Model model = cnn_lens::load_model_file(reference_weights());
  return model;
}

/// Every weight and bias zero.
inline cnn_lens::Model zero_model() {
  std::map<std::string, cnn_lens::ConvWeights, std::less<>> conv;
  for (const auto& spec : cnn_lens::tiny_vgg_spec()) {
    if (const auto* h = std::get_if<cnn_lens::ConvHyper>(&spec.params)) {
      cnn_lens::ConvWeights w;
      for (std::size_t o = 0; o < h->out_channels; ++o) {
        w.kernels.push_back(cnn_lens::Tensor3D::zeros({h->in_channels, 3, 3}));
      }
      w.biases.assign(h->out_channels, 0.0f);
      conv.emplace(spec.name, std::move(w));
    }
  }
  cnn_lens::DenseWeights dense{10, 1690, std::vector<float>(16900, 0.0f),
                               std::vector<float>(10, 0.0f)};
  return cnn_lens::Model(std::move(conv), std::move(dense), cnn_lens::default_class_labels(), {},
                         "sha256:zero");
}

struct Golden {
  const char* file;
  const char* label;
  float probability;
  std::array<float, 10> logits;
};

// Recorded once from the bundled reference weights and frozen.
inline const std::array<Golden, 5>& golden_presets() {
  static const std::array<Golden, 5> g{{
      {"bell_pepper.png", "bell pepper", 0.674529374f,
       {22.5808678f, 22.7123394f, 22.0955505f, 25.2584686f, 14.2007599f, 16.0726471f,
        18.2451286f, 23.0132408f, 16.9082565f, 23.5761528f}},
      {"orange.jpg", "orange", 0.58306247f,
       {36.2710991f, 26.9127254f, 35.6490173f, 32.288353f, 36.9863548f, 24.5633087f,
        25.2991219f, 33.0884514f, 37.8989449f, 26.8184662f}},
      {"school_bus.png", "school bus", 0.735739827f,
       {31.2095337f, 21.635622f, 31.6580353f, 25.3516464f, 35.0582542f, 20.4994392f,
        22.346386f, 28.6425858f, 33.863575f, 20.7648277f}},
      {"koala.png", "koala", 0.897992432f,
       {9.54034042f, 2.43063354f, 12.0419159f, 8.00126648f, 2.07234192f, 17.9818268f,
        15.6915083f, 13.3217278f, 2.04430771f, 3.77574921f}},
      {"espresso.jpg", "espresso", 0.554831624f,
       {8.81580734f, 4.27526283f, 11.3436241f, 7.87573242f, 2.07149887f, 14.3634644f,
        14.8023252f, 12.7027969f, 1.73474503f, 5.20204163f}},
  }};
  return g;
}

}  // namespace fixtures

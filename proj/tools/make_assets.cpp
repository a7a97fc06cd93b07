// Regenerates the bundled reference assets:
//
//   <out>/reference_weights.json   hand-constructed Tiny VGG weights
//   <out>/presets/*.png|*.jpg      synthetic preset photographs
//
// The weights are not trained. conv_1_1 computes ten colour detectors (raw
// R, G, B plus rectified red, green, blue, yellow, dark, white and warm
// responses averaged over the 3x3 window); the later convolutions pass each
// channel through unchanged. The output layer is a nearest-prototype
// classifier over centre-weighted channel means: each class owns a prototype
// colour composition, rendered independently of the presets, and
//   logit_c = T * (f . mu_c - |mu_c|^2 / 2)
// ranks classes by squared distance between feature f and prototype mu_c.
//
// Usage: make_assets <output-dir>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cnn_lens/image.hpp"
#include "cnn_lens/model.hpp"

namespace {

using Color = std::array<float, 3>;
using cnn_lens::ConvWeights;
using cnn_lens::Shape3;
using cnn_lens::Tensor3D;

constexpr float kTemperature = 40.0f;
constexpr std::size_t kGrid = 13;

// Floating-point RGB canvas with simple shape primitives.
class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h, Color fill) : w_(w), h_(h), px_(w * h, fill) {}

  void ellipse(double cx, double cy, double rx, double ry, Color c, double shade = 0.0) {
    for (std::size_t y = 0; y < h_; ++y) {
      for (std::size_t x = 0; x < w_; ++x) {
        const double dx = (x + 0.5 - cx * w_) / (rx * w_);
        const double dy = (y + 0.5 - cy * h_) / (ry * h_);
        const double d = dx * dx + dy * dy;
        if (d > 1.0) continue;
        const float k = static_cast<float>(1.0 - shade * d);
        px_[y * w_ + x] = {c[0] * k, c[1] * k, c[2] * k};
      }
    }
  }

  void rect(double x0, double y0, double x1, double y1, Color c) {
    for (std::size_t y = static_cast<std::size_t>(y0 * h_); y < static_cast<std::size_t>(y1 * h_); ++y) {
      for (std::size_t x = static_cast<std::size_t>(x0 * w_); x < static_cast<std::size_t>(x1 * w_); ++x) {
        px_[y * w_ + x] = c;
      }
    }
  }

  void noise(float amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& p : px_) {
      for (float& v : p) {
        const float u = static_cast<float>(rng() >> 40) / 16777216.0f;
        v += (2.0f * u - 1.0f) * amplitude;
      }
    }
  }

  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(px_.size() * 3);
    for (const auto& p : px_) {
      for (float v : p) {
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
      }
    }
    return out;
  }

  std::size_t width() const { return w_; }
  std::size_t height() const { return h_; }

 private:
  std::size_t w_;
  std::size_t h_;
  std::vector<Color> px_;
};

struct Detector {
  Color weights;
  float bias;
};

// Order matches the feature channels documented above.
const std::array<Detector, 10>& detectors() {
  static const std::array<Detector, 10> d{{
      {{1.0f, 0.0f, 0.0f}, 0.0f},              // R
      {{0.0f, 1.0f, 0.0f}, 0.0f},              // G
      {{0.0f, 0.0f, 1.0f}, 0.0f},              // B
      {{1.0f, -1.2f, -0.3f}, -0.1f},           // red
      {{-1.0f, 1.0f, -0.5f}, -0.05f},          // green
      {{-0.7f, -0.3f, 1.0f}, -0.05f},          // blue
      {{0.2f, 1.0f, -1.0f}, -0.3f},            // yellow
      {{-1.0f / 3, -1.0f / 3, -1.0f / 3}, 0.35f},  // dark
      {{1.0f / 3, 1.0f / 3, 1.0f / 3}, -0.75f},    // white
      {{0.7f, 0.3f, -1.0f}, 0.0f},             // warm
  }};
  return d;
}

std::map<std::string, ConvWeights, std::less<>> feature_convs() {
  std::map<std::string, ConvWeights, std::less<>> conv;
  ConvWeights first;
  for (const auto& det : detectors()) {
    std::vector<float> k(3 * 9);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t t = 0; t < 9; ++t) k[c * 9 + t] = det.weights[c] / 9.0f;
    }
    first.kernels.emplace_back(Shape3{3, 3, 3}, std::move(k));
    first.biases.push_back(det.bias);
  }
  conv.emplace("conv_1_1", std::move(first));

  ConvWeights identity;
  for (std::size_t o = 0; o < 10; ++o) {
    std::vector<float> k(10 * 9, 0.0f);
    k[o * 9 + 4] = 1.0f;
    identity.kernels.emplace_back(Shape3{10, 3, 3}, std::move(k));
    identity.biases.push_back(0.0f);
  }
  for (const char* name : {"conv_1_2", "conv_2_1", "conv_2_2"}) conv.emplace(name, identity);
  return conv;
}

// Centre 7x7 cells weigh four times as much as the border; sums to one.
std::vector<float> spatial_weights() {
  std::vector<float> s(kGrid * kGrid);
  float total = 0.0f;
  for (std::size_t r = 0; r < kGrid; ++r) {
    for (std::size_t k = 0; k < kGrid; ++k) {
      const bool centre = r >= 3 && r <= 9 && k >= 3 && k <= 9;
      s[r * kGrid + k] = centre ? 1.0f : 0.25f;
      total += s[r * kGrid + k];
    }
  }
  for (float& v : s) v /= total;
  return s;
}

std::vector<float> pooled_features(const cnn_lens::Model& model, const Canvas& img) {
  const auto input = cnn_lens::to_input_tensor(
      cnn_lens::resize_to_64(cnn_lens::center_crop_square(
          cnn_lens::RgbImage(img.width(), img.height(), img.bytes()))));
  const auto trace = cnn_lens::forward_partial(model, input, "max_pool_2");
  const auto& pooled = std::get<Tensor3D>(trace.layers.back().output);
  const auto s = spatial_weights();
  std::vector<float> f(10, 0.0f);
  for (std::size_t c = 0; c < 10; ++c) {
    for (std::size_t i = 0; i < kGrid * kGrid; ++i) f[c] += s[i] * pooled.channel(c)[i];
  }
  return f;
}

struct Prototype {
  Color object;
  Color background;
  Color accent;
};

// Object fills the central square, background the border, accent a band
// across the object. Order matches default_class_labels().
const std::array<Prototype, 10>& prototypes() {
  static const std::array<Prototype, 10> p{{
      {{0.95f, 0.45f, 0.10f}, {0.10f, 0.30f, 0.60f}, {0.90f, 0.90f, 0.90f}},  // lifeboat
      {{0.80f, 0.05f, 0.05f}, {0.25f, 0.55f, 0.15f}, {0.05f, 0.05f, 0.05f}},  // ladybug
      {{0.85f, 0.60f, 0.30f}, {0.45f, 0.30f, 0.20f}, {0.70f, 0.15f, 0.10f}},  // pizza
      {{0.80f, 0.08f, 0.06f}, {0.97f, 0.97f, 0.97f}, {0.20f, 0.50f, 0.10f}},  // bell pepper
      {{0.98f, 0.78f, 0.10f}, {0.50f, 0.50f, 0.50f}, {0.10f, 0.10f, 0.10f}},  // school bus
      {{0.60f, 0.60f, 0.60f}, {0.30f, 0.50f, 0.20f}, {0.25f, 0.25f, 0.25f}},  // koala
      {{0.25f, 0.13f, 0.06f}, {0.90f, 0.90f, 0.90f}, {0.55f, 0.35f, 0.20f}},  // espresso
      {{0.70f, 0.30f, 0.12f}, {0.20f, 0.45f, 0.15f}, {0.95f, 0.95f, 0.90f}},  // red panda
      {{1.00f, 0.60f, 0.05f}, {0.95f, 0.95f, 0.95f}, {0.40f, 0.60f, 0.10f}},  // orange
      {{0.85f, 0.10f, 0.10f}, {0.30f, 0.30f, 0.30f}, {0.05f, 0.05f, 0.05f}},  // sport car
  }};
  return p;
}

Canvas render_prototype(const Prototype& p) {
  Canvas c(64, 64, p.background);
  c.rect(0.2, 0.2, 0.8, 0.8, p.object);
  c.rect(0.2, 0.45, 0.8, 0.52, p.accent);
  return c;
}

cnn_lens::Model build_model() {
  auto conv = feature_convs();
  const auto& labels = cnn_lens::default_class_labels();
  cnn_lens::DenseWeights placeholder{10, cnn_lens::kFlattenLength,
                                     std::vector<float>(10 * cnn_lens::kFlattenLength, 0.0f),
                                     std::vector<float>(10, 0.0f)};
  const cnn_lens::Model features(conv, placeholder, labels, {}, "");

  const auto s = spatial_weights();
  cnn_lens::DenseWeights dense = placeholder;
  for (std::size_t cls = 0; cls < 10; ++cls) {
    const auto mu = pooled_features(features, render_prototype(prototypes()[cls]));
    float norm2 = 0.0f;
    for (std::size_t ch = 0; ch < 10; ++ch) {
      norm2 += mu[ch] * mu[ch];
      for (std::size_t i = 0; i < kGrid * kGrid; ++i) {
        dense.weights[cls * cnn_lens::kFlattenLength + ch * kGrid * kGrid + i] =
            kTemperature * mu[ch] * s[i];
      }
    }
    dense.biases[cls] = -0.5f * kTemperature * norm2;
  }
  return cnn_lens::Model(std::move(conv), std::move(dense), labels, {}, "");
}

struct Preset {
  std::string file;
  Canvas image;
  bool jpeg;
};

std::vector<Preset> presets() {
  std::vector<Preset> out;

  Canvas pepper(300, 240, {0.98f, 0.98f, 0.97f});
  pepper.ellipse(0.50, 0.56, 0.30, 0.36, {0.82f, 0.09f, 0.07f}, 0.35);
  pepper.ellipse(0.36, 0.50, 0.10, 0.20, {0.95f, 0.30f, 0.25f}, 0.2);
  pepper.rect(0.47, 0.12, 0.53, 0.24, {0.22f, 0.48f, 0.12f});
  pepper.noise(0.02f, 1);
  out.push_back({"bell_pepper.png", pepper, false});

  Canvas orange(256, 256, {0.94f, 0.94f, 0.92f});
  orange.ellipse(0.5, 0.52, 0.36, 0.36, {1.0f, 0.58f, 0.06f}, 0.25);
  orange.ellipse(0.52, 0.16, 0.05, 0.03, {0.35f, 0.55f, 0.12f});
  orange.noise(0.02f, 2);
  out.push_back({"orange.jpg", orange, true});

  Canvas bus(400, 260, {0.52f, 0.52f, 0.50f});
  bus.rect(0.10, 0.25, 0.90, 0.80, {0.97f, 0.76f, 0.09f});
  for (double x = 0.15; x < 0.85; x += 0.14) bus.rect(x, 0.33, x + 0.09, 0.48, {0.08f, 0.08f, 0.1f});
  bus.ellipse(0.25, 0.82, 0.05, 0.08, {0.05f, 0.05f, 0.05f});
  bus.ellipse(0.75, 0.82, 0.05, 0.08, {0.05f, 0.05f, 0.05f});
  bus.noise(0.02f, 3);
  out.push_back({"school_bus.png", bus, false});

  Canvas koala(200, 200, {0.30f, 0.50f, 0.22f});
  koala.ellipse(0.5, 0.55, 0.33, 0.33, {0.62f, 0.62f, 0.64f}, 0.15);
  koala.ellipse(0.22, 0.28, 0.12, 0.12, {0.55f, 0.55f, 0.57f});
  koala.ellipse(0.78, 0.28, 0.12, 0.12, {0.55f, 0.55f, 0.57f});
  koala.ellipse(0.5, 0.6, 0.06, 0.09, {0.15f, 0.15f, 0.15f});
  koala.noise(0.03f, 4);
  out.push_back({"koala.png", koala, false});

  Canvas espresso(320, 320, {0.92f, 0.91f, 0.90f});
  espresso.ellipse(0.5, 0.5, 0.42, 0.42, {0.97f, 0.97f, 0.97f});
  espresso.ellipse(0.5, 0.5, 0.30, 0.30, {0.27f, 0.14f, 0.06f}, 0.3);
  espresso.ellipse(0.46, 0.46, 0.10, 0.08, {0.55f, 0.36f, 0.20f});
  espresso.noise(0.02f, 5);
  out.push_back({"espresso.jpg", espresso, true});

  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_assets <output-dir>\n";
    return 2;
  }
  const std::filesystem::path root = argv[1];
  std::filesystem::create_directories(root / "presets");

  const auto model = build_model();
  {
    std::ofstream out(root / "reference_weights.json", std::ios::binary);
    out << cnn_lens::write_model(model);
  }

  for (const auto& p : presets()) {
    const auto px = p.image.bytes();
    const auto bytes = p.jpeg ? cnn_lens::encode_jpeg(p.image.width(), p.image.height(), 3, px, 92)
                              : cnn_lens::encode_png(p.image.width(), p.image.height(), 3, px);
    std::ofstream out(root / "presets" / p.file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

    const auto trace = cnn_lens::forward(model, cnn_lens::image_to_input(bytes));
    std::cout << p.file << " -> " << trace.prediction->label << " (" << trace.prediction->probability
              << ")\n";
  }
  return 0;
}

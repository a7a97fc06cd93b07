#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cnn_lens/image.hpp"
#include "cnn_lens/layers.hpp"
#include "cnn_lens/tensor.hpp"

namespace cnn_lens {

enum class LayerKind { conv, relu, maxpool, flatten, dense, softmax };

std::string_view to_string(LayerKind kind);
/// Throws ParseError on an unknown name.
LayerKind layer_kind_from_string(std::string_view name);

struct PoolParams {
  std::size_t window = 2;
  std::size_t stride = 2;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

struct DenseParams {
  std::size_t in = 0;
  std::size_t out = 0;
  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::variant<std::monostate, ConvHyper, PoolParams, DenseParams> params;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline constexpr Shape3 kTinyVggInput{3, 64, 64};
inline constexpr std::size_t kNumClasses = 10;
inline constexpr std::size_t kFlattenLength = 1690;

/// The fixed 13-layer Tiny VGG sequence (input excluded):
/// two identical modules of (conv, relu, conv, relu, maxpool), then flatten,
/// dense "output" and softmax. All convolutions are 10 filters, 3x3, stride 1,
/// no padding; pools are 2x2 with stride 2.
const std::vector<LayerSpec>& tiny_vgg_spec();

/// Index into tiny_vgg_spec(); throws UnknownLayerError.
std::size_t layer_index(std::string_view name);

/// Immutable Tiny VGG parameters. Safe to share across threads.
class Model {
 public:
  /// Validates every weight against tiny_vgg_spec(); throws
  /// ShapeMismatchError naming the offending layer.
  Model(std::map<std::string, ConvWeights, std::less<>> conv_weights, DenseWeights dense,
        std::vector<std::string> class_labels, Normalization normalization,
        std::string fingerprint);

  const std::vector<LayerSpec>& layers() const { return tiny_vgg_spec(); }
  const ConvWeights& conv_weights(std::string_view layer) const;
  const DenseWeights& dense_weights() const noexcept { return dense_; }
  const std::vector<std::string>& class_labels() const noexcept { return labels_; }
  const Normalization& normalization() const noexcept { return normalization_; }
  /// "sha256:<hex>" of the weights document the model was loaded from.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::map<std::string, ConvWeights, std::less<>> conv_;
  DenseWeights dense_;
  std::vector<std::string> labels_;
  Normalization normalization_;
  std::string fingerprint_;
};

inline constexpr int kWeightsFormatVersion = 1;
inline constexpr std::uint64_t kDefaultSeed = 42;

/// Parses a weights document. Throws ParseError, VersionError or
/// ShapeMismatchError.
Model load_model(std::string_view bytes);
Model load_model_file(const std::filesystem::path& path);

/// Canonical weights document for `model`; load_model(write_model(m))
/// reproduces every parameter exactly.
std::string write_model(const Model& model);

/// Deterministic He-uniform initialization from a 64-bit Mersenne Twister.
/// Biases start at zero. Labels default to the reference class list.
Model seeded_model(std::uint64_t seed = kDefaultSeed);

/// Class labels of the reference weights, in output order.
const std::vector<std::string>& default_class_labels();

std::string sha256_hex(std::string_view bytes);

// ---------------------------------------------------------------------------
// Forward trace

using Activation = std::variant<Tensor3D, Vector1D>;
using Dims = std::vector<std::size_t>;

Dims dims_of(const Activation& a);

struct ConvDetail {
  ConvHyper hyper;
  ConvWeights weights;
  std::vector<Tensor3D> intermediates;
};

struct PoolDetail {
  PoolParams params;
  std::vector<Cell> argmax;
};

struct FlattenDetail {
  std::vector<Index3> index_map;
};

struct DenseDetail {
  DenseWeights weights;
};

struct SoftmaxDetail {
  float max_logit = 0.0f;
  std::vector<float> terms;
  float normalizer = 0.0f;
};

using LayerDetail = std::variant<std::monostate, ConvDetail, PoolDetail, FlattenDetail,
                                 DenseDetail, SoftmaxDetail>;

struct LayerRecord {
  std::string name;
  LayerKind kind = LayerKind::relu;
  Dims input_shape;
  Activation output;
  LayerDetail detail;
};

struct Prediction {
  std::size_t class_index = 0;
  std::string label;
  float probability = 0.0f;
};

struct Trace {
  std::string model_fingerprint;
  /// "upload" or "preset:<id>".
  std::string provenance = "upload";
  std::vector<std::string> class_labels;
  Tensor3D input;
  std::vector<LayerRecord> layers;
  /// Present once the softmax layer has been evaluated.
  std::optional<Prediction> prediction;

  /// Throws UnknownLayerError when `name` is not recorded.
  const LayerRecord& layer(std::string_view name) const;
};

/// Evaluates one layer on the previous activation. forward() is a fold of
/// this function, so recomputing from a stored activation is exact.
LayerRecord apply_layer(const Model& model, const LayerSpec& spec, const Activation& input);

/// Full traced forward pass. Input must be 3 x 64 x 64.
Trace forward(const Model& model, const Tensor3D& input, std::string provenance = "upload");

/// Trace truncated after layer `upto`; bitwise prefix of forward().
Trace forward_partial(const Model& model, const Tensor3D& input, std::string_view upto,
                      std::string provenance = "upload");

}  // namespace cnn_lens

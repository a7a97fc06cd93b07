#include "cnn_lens/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "cnn_lens/errors.hpp"

namespace cnn_lens {
namespace {

LayerSpec conv(std::string name, std::size_t in_channels) {
  return {std::move(name), LayerKind::conv, ConvHyper{3, 1, 0, in_channels, 10}};
}
LayerSpec simple(std::string name, LayerKind kind) { return {std::move(name), kind, {}}; }
LayerSpec pool(std::string name) {
  return {std::move(name), LayerKind::maxpool, PoolParams{2, 2}};
}

std::string shape_text(const Dims& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(d[i]);
  }
  return s;
}

const Tensor3D& expect_tensor(const Activation& a, const LayerSpec& spec) {
  if (const auto* t = std::get_if<Tensor3D>(&a)) return *t;
  throw ConfigError("layer '" + spec.name + "' expects a 3-D input, got " +
                    shape_text(dims_of(a)));
}

const Vector1D& expect_vector(const Activation& a, const LayerSpec& spec) {
  if (const auto* v = std::get_if<Vector1D>(&a)) return *v;
  throw ConfigError("layer '" + spec.name + "' expects a 1-D input, got " +
                    shape_text(dims_of(a)));
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  static constexpr std::array kinds{LayerKind::conv,    LayerKind::relu,  LayerKind::maxpool,
                                    LayerKind::flatten, LayerKind::dense, LayerKind::softmax};
  for (auto k : kinds) {
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown layer kind '" + std::string(name) + "'");
}

const std::vector<LayerSpec>& tiny_vgg_spec() {
  static const std::vector<LayerSpec> spec{
      conv("conv_1_1", 3),
      simple("relu_1_1", LayerKind::relu),
      conv("conv_1_2", 10),
      simple("relu_1_2", LayerKind::relu),
      pool("max_pool_1"),
      conv("conv_2_1", 10),
      simple("relu_2_1", LayerKind::relu),
      conv("conv_2_2", 10),
      simple("relu_2_2", LayerKind::relu),
      pool("max_pool_2"),
      simple("flatten", LayerKind::flatten),
      {"output", LayerKind::dense, DenseParams{kFlattenLength, kNumClasses}},
      simple("softmax", LayerKind::softmax),
  };
  return spec;
}

std::size_t layer_index(std::string_view name) {
  const auto& spec = tiny_vgg_spec();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i].name == name) return i;
  }
  throw UnknownLayerError(std::string(name));
}

const std::vector<std::string>& default_class_labels() {
  static const std::vector<std::string> labels{
      "lifeboat", "ladybug",  "pizza",     "bell pepper", "school bus",
      "koala",    "espresso", "red panda", "orange",      "sport car"};
  return labels;
}

Model::Model(std::map<std::string, ConvWeights, std::less<>> conv_weights, DenseWeights dense,
             std::vector<std::string> class_labels, Normalization normalization,
             std::string fingerprint)
    : conv_(std::move(conv_weights)),
      dense_(std::move(dense)),
      labels_(std::move(class_labels)),
      normalization_(normalization),
      fingerprint_(std::move(fingerprint)) {
  std::size_t conv_layers = 0;
  for (const auto& spec : tiny_vgg_spec()) {
    if (spec.kind == LayerKind::conv) {
      ++conv_layers;
      auto it = conv_.find(spec.name);
      if (it == conv_.end()) throw ShapeMismatchError(spec.name, "missing weights");
      try {
        it->second.check_against(std::get<ConvHyper>(spec.params));
      } catch (const ConfigError& e) {
        throw ShapeMismatchError(spec.name, e.what());
      }
    } else if (spec.kind == LayerKind::dense) {
      const auto& p = std::get<DenseParams>(spec.params);
      if (dense_.out != p.out || dense_.in != p.in) {
        throw ShapeMismatchError(spec.name, "expected " + std::to_string(p.out) + "x" +
                                                std::to_string(p.in) + " weights");
      }
      try {
        dense_.check();
      } catch (const ConfigError& e) {
        throw ShapeMismatchError(spec.name, e.what());
      }
    }
  }
  if (conv_.size() != conv_layers) {
    const auto& spec = tiny_vgg_spec();
    for (const auto& entry : conv_) {
      const bool known = std::any_of(spec.begin(), spec.end(), [&](const LayerSpec& s) {
        return s.kind == LayerKind::conv && s.name == entry.first;
      });
      if (!known) throw ShapeMismatchError(entry.first, "unexpected convolution weights");
    }
  }
  if (labels_.size() != kNumClasses) {
    throw ShapeMismatchError("output", "expected " + std::to_string(kNumClasses) +
                                           " class labels, got " +
                                           std::to_string(labels_.size()));
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (!std::isfinite(normalization_.mean[c]) || !std::isfinite(normalization_.stddev[c]) ||
        normalization_.stddev[c] == 0.0f) {
      throw ConfigError("normalization needs finite mean and non-zero stddev");
    }
  }
}

const ConvWeights& Model::conv_weights(std::string_view layer) const {
  auto it = conv_.find(layer);
  if (it == conv_.end()) throw UnknownLayerError(std::string(layer));
  return it->second;
}

Dims dims_of(const Activation& a) {
  if (const auto* t = std::get_if<Tensor3D>(&a)) return {t->channels(), t->rows(), t->cols()};
  return {std::get<Vector1D>(a).size()};
}

const LayerRecord& Trace::layer(std::string_view name) const {
  for (const auto& rec : layers) {
    if (rec.name == name) return rec;
  }
  throw UnknownLayerError(std::string(name));
}

LayerRecord apply_layer(const Model& model, const LayerSpec& spec, const Activation& input) {
  LayerRecord rec{spec.name, spec.kind, dims_of(input), Vector1D({0.0f}), {}};
  switch (spec.kind) {
    case LayerKind::conv: {
      const auto& hyper = std::get<ConvHyper>(spec.params);
      const auto& weights = model.conv_weights(spec.name);
      auto result = conv2d(expect_tensor(input, spec), weights, hyper);
      rec.output = std::move(result.output);
      rec.detail = ConvDetail{hyper, weights, std::move(result.intermediates)};
      break;
    }
    case LayerKind::relu:
      rec.output = relu(expect_tensor(input, spec));
      break;
    case LayerKind::maxpool: {
      const auto& params = std::get<PoolParams>(spec.params);
      auto result = max_pool(expect_tensor(input, spec), params.window, params.stride);
      rec.output = std::move(result.output);
      rec.detail = PoolDetail{params, std::move(result.argmax)};
      break;
    }
    case LayerKind::flatten: {
      auto result = flatten(expect_tensor(input, spec));
      rec.output = std::move(result.output);
      rec.detail = FlattenDetail{std::move(result.index_map)};
      break;
    }
    case LayerKind::dense:
      rec.output = dense(expect_vector(input, spec), model.dense_weights());
      rec.detail = DenseDetail{model.dense_weights()};
      break;
    case LayerKind::softmax: {
      auto result = softmax_terms(expect_vector(input, spec));
      rec.output = std::move(result.probabilities);
      rec.detail = SoftmaxDetail{result.max_logit, std::move(result.terms), result.normalizer};
      break;
    }
  }
  return rec;
}

namespace {

Trace run(const Model& model, const Tensor3D& input, std::size_t last,
          std::string provenance) {
  if (input.shape() != kTinyVggInput) {
    throw ConfigError("input must be 3x64x64, got " +
                      shape_text({input.channels(), input.rows(), input.cols()}));
  }
  Trace trace{model.fingerprint(), std::move(provenance), model.class_labels(), input, {}, {}};
  const auto& spec = tiny_vgg_spec();
  trace.layers.reserve(last + 1);
  for (std::size_t i = 0; i <= last; ++i) {
    const Activation prev = i == 0 ? Activation(input) : trace.layers.back().output;
    trace.layers.push_back(apply_layer(model, spec[i], prev));
  }
  const auto& final_rec = trace.layers.back();
  if (final_rec.kind == LayerKind::softmax) {
    const auto p = std::get<Vector1D>(final_rec.output).data();
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    trace.prediction = Prediction{best, model.class_labels()[best], p[best]};
  }
  return trace;
}

}  // namespace

Trace forward(const Model& model, const Tensor3D& input, std::string provenance) {
  return run(model, input, tiny_vgg_spec().size() - 1, std::move(provenance));
}

Trace forward_partial(const Model& model, const Tensor3D& input, std::string_view upto,
                      std::string provenance) {
  return run(model, input, layer_index(upto), std::move(provenance));
}

}  // namespace cnn_lens

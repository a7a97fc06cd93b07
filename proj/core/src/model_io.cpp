#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "cnn_lens/errors.hpp"
#include "cnn_lens/model.hpp"
#include "json.hpp"
#include "json_writer.hpp"

namespace cnn_lens {
namespace {

using nlohmann::json;
using detail::JsonWriter;

const json& member(const json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object()) throw ParseError(std::string(where) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(std::string(where) + ": missing field '" + std::string(key) + "'");
  }
  return *it;
}

std::size_t read_count(const json& obj, std::string_view key, std::string_view where) {
  const json& v = member(obj, key, where);
  if (!v.is_number_unsigned()) {
    throw ParseError(std::string(where) + ": field '" + std::string(key) +
                     "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

float read_real(const json& v, const std::string& layer) {
  if (!v.is_number()) throw ParseError("weights for '" + layer + "': expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d) || std::fabs(d) > std::numeric_limits<float>::max()) {
    throw ParseError("weights for '" + layer + "': value out of 32-bit range");
  }
  return static_cast<float>(d);
}

// Reads a nested array whose extents must equal `dims`, appending row-major.
void read_nested(const json& v, std::span<const std::size_t> dims, std::vector<float>& out,
                 const std::string& layer, std::string_view field) {
  if (dims.empty()) {
    out.push_back(read_real(v, layer));
    return;
  }
  if (!v.is_array()) {
    throw ParseError("weights for '" + layer + "': " + std::string(field) +
                     " must be a nested array");
  }
  if (v.size() != dims[0]) {
    throw ShapeMismatchError(layer, std::string(field) + " has extent " +
                                        std::to_string(v.size()) + ", expected " +
                                        std::to_string(dims[0]));
  }
  for (const auto& item : v) read_nested(item, dims.subspan(1), out, layer, field);
}

LayerSpec parse_layer_spec(const json& j) {
  const std::string where = "architecture entry";
  const json& name = member(j, "name", where);
  const json& kind = member(j, "kind", where);
  if (!name.is_string() || !kind.is_string()) {
    throw ParseError(where + ": name and kind must be strings");
  }
  LayerSpec spec{name.get<std::string>(), layer_kind_from_string(kind.get<std::string>()), {}};
  const std::string at = "layer '" + spec.name + "'";
  switch (spec.kind) {
    case LayerKind::conv:
      spec.params = ConvHyper{read_count(j, "kernel_size", at), read_count(j, "stride", at),
                              read_count(j, "padding", at), read_count(j, "in_channels", at),
                              read_count(j, "out_channels", at)};
      break;
    case LayerKind::maxpool:
      spec.params = PoolParams{read_count(j, "window", at), read_count(j, "stride", at)};
      break;
    case LayerKind::dense:
      spec.params = DenseParams{read_count(j, "in", at), read_count(j, "out", at)};
      break;
    default:
      break;
  }
  return spec;
}

void write_layer_spec(JsonWriter& w, const LayerSpec& spec) {
  w.begin_object().key("name").value(spec.name).key("kind").value(to_string(spec.kind));
  if (const auto* h = std::get_if<ConvHyper>(&spec.params)) {
    w.key("kernel_size").value(h->kernel_size).key("stride").value(h->stride);
    w.key("padding").value(h->padding).key("in_channels").value(h->in_channels);
    w.key("out_channels").value(h->out_channels);
  } else if (const auto* p = std::get_if<PoolParams>(&spec.params)) {
    w.key("window").value(p->window).key("stride").value(p->stride);
  } else if (const auto* d = std::get_if<DenseParams>(&spec.params)) {
    w.key("in").value(d->in).key("out").value(d->out);
  }
  w.end_object();
}

// Writes `data` as a nested array with extents `dims`.
void write_nested(JsonWriter& w, std::span<const std::size_t> dims, std::span<const float> data) {
  if (dims.size() == 1) {
    w.floats(data);
    return;
  }
  const std::size_t stride = data.size() / dims[0];
  w.begin_array();
  for (std::size_t i = 0; i < dims[0]; ++i) {
    write_nested(w, dims.subspan(1), data.subspan(i * stride, stride));
  }
  w.end_array();
}

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [-limit, limit) from the top 24 bits of each draw.
  float operator()(float limit) {
    const auto bits = static_cast<std::uint32_t>(engine_() >> 40);
    const float unit = static_cast<float>(bits) * (1.0f / 16777216.0f);
    return (2.0f * unit - 1.0f) * limit;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr)) {
    throw Error("sha256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

Model load_model(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("weights file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("weights file: top level must be an object");

  const json& version = member(doc, "format_version", "weights file");
  if (!version.is_number_integer()) throw ParseError("weights file: bad format_version");
  if (version.get<long long>() != kWeightsFormatVersion) {
    throw VersionError("unsupported weights format_version " + version.dump() + " (expected " +
                       std::to_string(kWeightsFormatVersion) + ")");
  }

  try {
    const json& arch = member(doc, "architecture", "weights file");
    if (!arch.is_array()) throw ParseError("weights file: architecture must be an array");
    const auto& expected = tiny_vgg_spec();
    for (std::size_t i = 0; i < std::max(arch.size(), expected.size()); ++i) {
      if (i >= arch.size()) throw ShapeMismatchError(expected[i].name, "missing from architecture");
      const LayerSpec got = parse_layer_spec(arch[i]);
      if (i >= expected.size()) throw ShapeMismatchError(got.name, "not part of Tiny VGG");
      if (!(got == expected[i])) {
        throw ShapeMismatchError(expected[i].name,
                                 "architecture entry " + std::to_string(i) + " ('" + got.name +
                                     "') does not match the Tiny VGG definition");
      }
    }

    const json& labels_json = member(doc, "class_labels", "weights file");
    if (!labels_json.is_array()) throw ParseError("weights file: class_labels must be an array");
    std::vector<std::string> labels;
    for (const auto& l : labels_json) {
      if (!l.is_string()) throw ParseError("weights file: class labels must be strings");
      labels.push_back(l.get<std::string>());
    }

    Normalization norm;
    if (auto it = doc.find("normalization"); it != doc.end()) {
      for (auto [key, target] : {std::pair{"mean", &norm.mean}, std::pair{"std", &norm.stddev}}) {
        const json& arr = member(*it, key, "normalization");
        std::vector<float> values;
        static constexpr std::size_t three[] = {3};
        read_nested(arr, three, values, "normalization", key);
        std::copy(values.begin(), values.end(), target->begin());
      }
    }

    const json& weights = member(doc, "weights", "weights file");
    if (!weights.is_object()) throw ParseError("weights file: weights must be an object");
    std::map<std::string, ConvWeights, std::less<>> conv;
    DenseWeights dense_w;
    for (const auto& spec : expected) {
      if (spec.kind != LayerKind::conv && spec.kind != LayerKind::dense) continue;
      auto it = weights.find(spec.name);
      if (it == weights.end()) throw ShapeMismatchError(spec.name, "missing weights");
      const std::string where = "weights for '" + spec.name + "'";
      const json& kernel = member(*it, "kernel", where);
      const json& bias = member(*it, "bias", where);
      if (const auto* h = std::get_if<ConvHyper>(&spec.params)) {
        const std::size_t kdims[] = {h->out_channels, h->in_channels, h->kernel_size,
                                     h->kernel_size};
        std::vector<float> flat;
        read_nested(kernel, kdims, flat, spec.name, "kernel");
        const std::size_t bdims[] = {h->out_channels};
        ConvWeights cw;
        read_nested(bias, bdims, cw.biases, spec.name, "bias");
        const std::size_t per = h->in_channels * h->kernel_size * h->kernel_size;
        for (std::size_t o = 0; o < h->out_channels; ++o) {
          cw.kernels.emplace_back(Shape3{h->in_channels, h->kernel_size, h->kernel_size},
                                  std::vector<float>(flat.begin() + o * per,
                                                     flat.begin() + (o + 1) * per));
        }
        conv.emplace(spec.name, std::move(cw));
      } else {
        const auto& d = std::get<DenseParams>(spec.params);
        const std::size_t kdims[] = {d.out, d.in};
        const std::size_t bdims[] = {d.out};
        dense_w.out = d.out;
        dense_w.in = d.in;
        read_nested(kernel, kdims, dense_w.weights, spec.name, "kernel");
        read_nested(bias, bdims, dense_w.biases, spec.name, "bias");
      }
    }
    for (const auto& item : weights.items()) {
      if (!conv.contains(item.key()) && item.key() != "output") {
        throw ShapeMismatchError(item.key(), "unexpected weights entry");
      }
    }

    return Model(std::move(conv), std::move(dense_w), std::move(labels), norm,
                 "sha256:" + sha256_hex(bytes));
  } catch (const json::exception& e) {
    throw ParseError(std::string("weights file: ") + e.what());
  }
}

Model load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open weights file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

std::string write_model(const Model& model) {
  JsonWriter w(1 << 18);
  w.begin_object();
  w.key("format_version").value(kWeightsFormatVersion);
  w.key("architecture").begin_array();
  for (const auto& spec : model.layers()) write_layer_spec(w, spec);
  w.end_array();
  w.key("class_labels").strings(model.class_labels());
  const auto& norm = model.normalization();
  w.key("normalization").begin_object();
  w.key("mean").floats(norm.mean);
  w.key("std").floats(norm.stddev);
  w.end_object();
  w.key("weights").begin_object();
  for (const auto& spec : model.layers()) {
    if (const auto* h = std::get_if<ConvHyper>(&spec.params)) {
      const auto& cw = model.conv_weights(spec.name);
      w.key(spec.name).begin_object().key("kernel").begin_array();
      const std::size_t kdims[] = {h->in_channels, h->kernel_size, h->kernel_size};
      for (const auto& k : cw.kernels) write_nested(w, kdims, k.data());
      w.end_array().key("bias").floats(cw.biases).end_object();
    } else if (const auto* d = std::get_if<DenseParams>(&spec.params)) {
      const auto& dw = model.dense_weights();
      const std::size_t kdims[] = {d->out, d->in};
      w.key(spec.name).begin_object().key("kernel");
      write_nested(w, kdims, dw.weights);
      w.key("bias").floats(dw.biases).end_object();
    }
  }
  w.end_object();
  w.end_object();
  return w.take();
}

Model seeded_model(std::uint64_t seed) {
  Uniform draw(seed);
  std::map<std::string, ConvWeights, std::less<>> conv;
  DenseWeights dense_w;
  for (const auto& spec : tiny_vgg_spec()) {
    if (const auto* h = std::get_if<ConvHyper>(&spec.params)) {
      const std::size_t per = h->in_channels * h->kernel_size * h->kernel_size;
      const float limit = std::sqrt(6.0f / static_cast<float>(per));
      ConvWeights cw;
      for (std::size_t o = 0; o < h->out_channels; ++o) {
        std::vector<float> k(per);
        for (float& v : k) v = draw(limit);
        cw.kernels.emplace_back(Shape3{h->in_channels, h->kernel_size, h->kernel_size},
                                std::move(k));
      }
      cw.biases.assign(h->out_channels, 0.0f);
      conv.emplace(spec.name, std::move(cw));
    } else if (const auto* d = std::get_if<DenseParams>(&spec.params)) {
      const float limit = std::sqrt(6.0f / static_cast<float>(d->in));
      dense_w = {d->out, d->in, std::vector<float>(d->out * d->in), std::vector<float>(d->out)};
      for (float& v : dense_w.weights) v = draw(limit);
    }
  }
  Model unnamed(conv, dense_w, default_class_labels(), {}, "");
  auto fingerprint = "sha256:" + sha256_hex(write_model(unnamed));
  return Model(std::move(conv), std::move(dense_w), default_class_labels(), {},
               std::move(fingerprint));
}

}  // namespace cnn_lens

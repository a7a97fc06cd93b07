#include "cnn_lens/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cnn_lens/errors.hpp"
#include "json.hpp"
#include "json_writer.hpp"

namespace cnn_lens {
namespace {

using nlohmann::json;
using detail::JsonWriter;

// ---------------------------------------------------------------------------
// Writing

void write_tensor(JsonWriter& w, const Dims& shape, std::span<const float> data) {
  w.begin_object();
  w.key("shape").integers<std::size_t>(shape);
  w.key("data").floats(data);
  w.end_object();
}

void write_stacked(JsonWriter& w, const std::vector<Tensor3D>& parts) {
  const Shape3 s = parts.front().shape();
  std::vector<float> flat;
  flat.reserve(parts.size() * s.size());
  for (const auto& t : parts) flat.insert(flat.end(), t.data().begin(), t.data().end());
  write_tensor(w, {parts.size(), s.channels, s.rows, s.cols}, flat);
}

void write_activation(JsonWriter& w, const Activation& a) {
  if (const auto* t = std::get_if<Tensor3D>(&a)) {
    write_tensor(w, dims_of(a), t->data());
  } else {
    write_tensor(w, dims_of(a), std::get<Vector1D>(a).data());
  }
}

struct DetailWriter {
  JsonWriter& w;

  void operator()(const std::monostate&) const {}

  void operator()(const ConvDetail& d) const {
    w.key("conv").begin_object();
    w.key("kernel_size").value(d.hyper.kernel_size);
    w.key("stride").value(d.hyper.stride);
    w.key("padding").value(d.hyper.padding);
    w.key("in_channels").value(d.hyper.in_channels);
    w.key("out_channels").value(d.hyper.out_channels);
    w.key("kernel");
    write_stacked(w, d.weights.kernels);
    w.key("bias").floats(d.weights.biases);
    w.key("intermediates");
    write_stacked(w, d.intermediates);
    w.end_object();
  }

  void operator()(const PoolDetail& d) const {
    std::vector<std::size_t> cells;
    cells.reserve(d.argmax.size() * 2);
    for (const auto& c : d.argmax) {
      cells.push_back(c.row);
      cells.push_back(c.col);
    }
    w.key("pool").begin_object();
    w.key("window").value(d.params.window);
    w.key("stride").value(d.params.stride);
    w.key("argmax").integers<std::size_t>(cells);
    w.end_object();
  }

  void operator()(const FlattenDetail& d) const {
    std::vector<std::size_t> coords;
    coords.reserve(d.index_map.size() * 3);
    for (const auto& i : d.index_map) {
      coords.push_back(i.channel);
      coords.push_back(i.row);
      coords.push_back(i.col);
    }
    w.key("flatten").begin_object();
    w.key("index_map").integers<std::size_t>(coords);
    w.end_object();
  }

  void operator()(const DenseDetail& d) const {
    w.key("dense").begin_object();
    w.key("weights");
    write_tensor(w, {d.weights.out, d.weights.in}, d.weights.weights);
    w.key("bias").floats(d.weights.biases);
    w.end_object();
  }

  void operator()(const SoftmaxDetail& d) const {
    w.key("softmax").begin_object();
    w.key("max_logit").value(d.max_logit);
    w.key("terms").floats(d.terms);
    w.key("normalizer").value(d.normalizer);
    w.end_object();
  }
};

// ---------------------------------------------------------------------------
// Reading

const json& field(const json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object()) throw ParseError(std::string(where) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(std::string(where) + ": missing field '" + std::string(key) + "'");
  }
  return *it;
}

std::size_t count_of(const json& v, std::string_view where) {
  if (!v.is_number_unsigned()) {
    throw ParseError(std::string(where) + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string text_of(const json& v, std::string_view where) {
  if (!v.is_string()) throw ParseError(std::string(where) + ": expected a string");
  return v.get<std::string>();
}

float real_of(const json& v, std::string_view where) {
  if (!v.is_number()) throw ParseError(std::string(where) + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d) || std::fabs(d) > std::numeric_limits<float>::max()) {
    throw ParseError(std::string(where) + ": value out of 32-bit range");
  }
  return static_cast<float>(d);
}

std::vector<float> reals_of(const json& v, std::string_view where) {
  if (!v.is_array()) throw ParseError(std::string(where) + ": expected an array");
  std::vector<float> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(real_of(x, where));
  return out;
}

std::vector<std::size_t> counts_of(const json& v, std::string_view where) {
  if (!v.is_array()) throw ParseError(std::string(where) + ": expected an array");
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(count_of(x, where));
  return out;
}

struct RawTensor {
  Dims shape;
  std::vector<float> data;
};

RawTensor tensor_of(const json& v, std::size_t rank, const std::string& where) {
  RawTensor t{counts_of(field(v, "shape", where), where), reals_of(field(v, "data", where), where)};
  if (t.shape.size() != rank) {
    throw ParseError(where + ": expected rank " + std::to_string(rank));
  }
  std::size_t n = 1;
  for (auto d : t.shape) n *= d;
  if (n == 0 || n != t.data.size()) throw ParseError(where + ": data length does not match shape");
  return t;
}

Tensor3D tensor3_of(const json& v, const std::string& where) {
  auto raw = tensor_of(v, 3, where);
  return Tensor3D({raw.shape[0], raw.shape[1], raw.shape[2]}, std::move(raw.data));
}

std::vector<Tensor3D> stacked_of(const json& v, const std::string& where) {
  auto raw = tensor_of(v, 4, where);
  const Shape3 part{raw.shape[1], raw.shape[2], raw.shape[3]};
  std::vector<Tensor3D> out;
  out.reserve(raw.shape[0]);
  for (std::size_t i = 0; i < raw.shape[0]; ++i) {
    auto first = raw.data.begin() + static_cast<std::ptrdiff_t>(i * part.size());
    out.emplace_back(part, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(part.size())));
  }
  return out;
}

Activation read_activation(const json& v, const std::string& where) {
  const json& shape = field(v, "shape", where);
  if (shape.is_array() && shape.size() == 1) {
    auto raw = tensor_of(v, 1, where);
    return Vector1D(std::move(raw.data));
  }
  return tensor3_of(v, where);
}

LayerDetail read_detail(const json& rec, const LayerSpec& spec, const Activation& output,
                        const std::string& where) {
  switch (spec.kind) {
    case LayerKind::relu:
      return std::monostate{};
    case LayerKind::conv: {
      const json& c = field(rec, "conv", where);
      ConvDetail d;
      d.hyper = {count_of(field(c, "kernel_size", where), where),
                 count_of(field(c, "stride", where), where),
                 count_of(field(c, "padding", where), where),
                 count_of(field(c, "in_channels", where), where),
                 count_of(field(c, "out_channels", where), where)};
      d.weights.kernels = stacked_of(field(c, "kernel", where), where + " kernel");
      d.weights.biases = reals_of(field(c, "bias", where), where + " bias");
      d.intermediates = stacked_of(field(c, "intermediates", where), where + " intermediates");
      try {
        d.weights.check_against(d.hyper);
      } catch (const ConfigError& e) {
        throw ParseError(where + ": " + e.what());
      }
      const auto& out = std::get<Tensor3D>(output);
      const Shape3 want{d.hyper.in_channels, out.rows(), out.cols()};
      if (d.intermediates.size() != d.hyper.out_channels ||
          std::any_of(d.intermediates.begin(), d.intermediates.end(),
                      [&](const Tensor3D& t) { return t.shape() != want; })) {
        throw ParseError(where + ": intermediates do not match the output shape");
      }
      return d;
    }
    case LayerKind::maxpool: {
      const json& p = field(rec, "pool", where);
      PoolDetail d;
      d.params = {count_of(field(p, "window", where), where),
                  count_of(field(p, "stride", where), where)};
      const auto cells = counts_of(field(p, "argmax", where), where);
      if (cells.size() != 2 * std::get<Tensor3D>(output).size()) {
        throw ParseError(where + ": argmax length does not match the output");
      }
      for (std::size_t i = 0; i < cells.size(); i += 2) d.argmax.push_back({cells[i], cells[i + 1]});
      return d;
    }
    case LayerKind::flatten: {
      const auto coords = counts_of(field(field(rec, "flatten", where), "index_map", where), where);
      if (coords.size() != 3 * std::get<Vector1D>(output).size()) {
        throw ParseError(where + ": index_map length does not match the output");
      }
      FlattenDetail d;
      for (std::size_t i = 0; i < coords.size(); i += 3) {
        d.index_map.push_back({coords[i], coords[i + 1], coords[i + 2]});
      }
      return d;
    }
    case LayerKind::dense: {
      const json& dj = field(rec, "dense", where);
      auto raw = tensor_of(field(dj, "weights", where), 2, where + " weights");
      DenseDetail d{{raw.shape[0], raw.shape[1], std::move(raw.data),
                     reals_of(field(dj, "bias", where), where + " bias")}};
      try {
        d.weights.check();
      } catch (const ConfigError& e) {
        throw ParseError(where + ": " + e.what());
      }
      return d;
    }
    case LayerKind::softmax: {
      const json& s = field(rec, "softmax", where);
      SoftmaxDetail d{real_of(field(s, "max_logit", where), where),
                      reals_of(field(s, "terms", where), where),
                      real_of(field(s, "normalizer", where), where)};
      if (d.terms.size() != std::get<Vector1D>(output).size()) {
        throw ParseError(where + ": softmax terms do not match the output");
      }
      return d;
    }
  }
  return std::monostate{};
}

void require_detail_max(float& worst, std::span<const float> a, std::span<const float> b) {
  worst = std::max(worst, max_abs_diff(a, b));
}

}  // namespace

std::string serialize_trace(const Trace& trace) {
  JsonWriter w(std::size_t{16} << 20);
  w.begin_object();
  w.key("schema_version").value(kTraceSchemaVersion);
  w.key("model_fingerprint").value(trace.model_fingerprint);
  w.key("provenance").value(trace.provenance);
  w.key("class_labels").strings(trace.class_labels);
  w.key("input");
  write_tensor(w, {trace.input.channels(), trace.input.rows(), trace.input.cols()},
               trace.input.data());
  w.key("layers").begin_array();
  for (const auto& rec : trace.layers) {
    w.begin_object();
    w.key("name").value(rec.name);
    w.key("kind").value(to_string(rec.kind));
    w.key("input_shape").integers<std::size_t>(rec.input_shape);
    w.key("output");
    write_activation(w, rec.output);
    std::visit(DetailWriter{w}, rec.detail);
    w.end_object();
  }
  w.end_array();
  if (trace.prediction) {
    w.key("prediction").begin_object();
    w.key("class_index").value(trace.prediction->class_index);
    w.key("label").value(trace.prediction->label);
    w.key("probability").value(trace.prediction->probability);
    w.end_object();
  }
  w.end_object();
  return w.take();
}

Trace deserialize_trace(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("trace document: ") + e.what());
  }
  try {
    const json& version = field(doc, "schema_version", "trace document");
    if (!version.is_number_integer()) throw ParseError("trace document: bad schema_version");
    if (version.get<long long>() != kTraceSchemaVersion) {
      throw VersionError("unsupported trace schema_version " + version.dump() + " (expected " +
                         std::to_string(kTraceSchemaVersion) + ")");
    }

    std::vector<std::string> labels;
    const json& labels_json = field(doc, "class_labels", "trace document");
    if (!labels_json.is_array()) throw ParseError("trace document: class_labels must be an array");
    for (const auto& l : labels_json) labels.push_back(text_of(l, "class label"));

    Trace trace{text_of(field(doc, "model_fingerprint", "trace document"), "model_fingerprint"),
                text_of(field(doc, "provenance", "trace document"), "provenance"),
                std::move(labels),
                tensor3_of(field(doc, "input", "trace document"), "input"),
                {},
                {}};

    const json& layers = field(doc, "layers", "trace document");
    if (!layers.is_array()) throw ParseError("trace document: layers must be an array");
    const auto& spec = tiny_vgg_spec();
    const bool has_prediction = doc.contains("prediction");
    const std::size_t expected_count = has_prediction ? spec.size() : layers.size();
    if (layers.size() > spec.size()) {
      throw ParseError("trace document: more layer records than Tiny VGG has layers");
    }

    Dims previous{trace.input.channels(), trace.input.rows(), trace.input.cols()};
    for (std::size_t i = 0; i < expected_count; ++i) {
      const LayerSpec& want = spec[i];
      if (i >= layers.size()) throw ParseError("missing layer record '" + want.name + "'");
      const json& rec = layers[i];
      const std::string name = text_of(field(rec, "name", "layer record"), "layer name");
      if (name != want.name) throw ParseError("missing layer record '" + want.name + "'");
      const std::string where = "layer '" + name + "'";
      if (layer_kind_from_string(text_of(field(rec, "kind", where), where)) != want.kind) {
        throw ParseError(where + ": kind does not match Tiny VGG");
      }
      LayerRecord out{name, want.kind, counts_of(field(rec, "input_shape", where), where),
                      read_activation(field(rec, "output", where), where), {}};
      const bool spatial = want.kind == LayerKind::conv || want.kind == LayerKind::relu ||
                           want.kind == LayerKind::maxpool;
      if (spatial != std::holds_alternative<Tensor3D>(out.output)) {
        throw ParseError(where + ": output has the wrong rank");
      }
      if (out.input_shape != previous) {
        throw ParseError(where + ": input_shape does not chain from the previous layer");
      }
      out.detail = read_detail(rec, want, out.output, where);
      previous = dims_of(out.output);
      trace.layers.push_back(std::move(out));
    }

    if (has_prediction) {
      const json& p = doc["prediction"];
      trace.prediction = Prediction{count_of(field(p, "class_index", "prediction"), "class_index"),
                                    text_of(field(p, "label", "prediction"), "label"),
                                    real_of(field(p, "probability", "prediction"), "probability")};
    }
    return trace;
  } catch (const json::exception& e) {
    throw ParseError(std::string("trace document: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("trace document: ") + e.what());
  }
}

std::vector<LayerDeviation> compare_traces(const Trace& a, const Trace& b) {
  std::vector<LayerDeviation> rows;
  LayerDeviation input{"input"};
  if (a.input.shape() == b.input.shape()) {
    input.output = max_abs_diff(a.input.data(), b.input.data());
  } else {
    input.comparable = false;
  }
  rows.push_back(input);

  const std::size_t n = std::max(a.layers.size(), b.layers.size());
  for (std::size_t i = 0; i < n; ++i) {
    const LayerRecord* la = i < a.layers.size() ? &a.layers[i] : nullptr;
    const LayerRecord* lb = i < b.layers.size() ? &b.layers[i] : nullptr;
    LayerDeviation row{la ? la->name : lb->name};
    if (!la || !lb || la->name != lb->name || dims_of(la->output) != dims_of(lb->output)) {
      row.comparable = false;
      rows.push_back(row);
      continue;
    }
    auto flat = [](const Activation& act) {
      return std::visit([](const auto& t) { return t.data(); }, act);
    };
    row.output = max_abs_diff(flat(la->output), flat(lb->output));
    if (const auto* ca = std::get_if<ConvDetail>(&la->detail)) {
      const auto* cb = std::get_if<ConvDetail>(&lb->detail);
      if (cb && ca->intermediates.size() == cb->intermediates.size() &&
          ca->intermediates.front().shape() == cb->intermediates.front().shape()) {
        for (std::size_t o = 0; o < ca->intermediates.size(); ++o) {
          require_detail_max(row.detail, ca->intermediates[o].data(), cb->intermediates[o].data());
        }
      } else {
        row.comparable = false;
      }
    } else if (const auto* sa = std::get_if<SoftmaxDetail>(&la->detail)) {
      const auto* sb = std::get_if<SoftmaxDetail>(&lb->detail);
      if (sb && sa->terms.size() == sb->terms.size()) {
        require_detail_max(row.detail, sa->terms, sb->terms);
      } else {
        row.comparable = false;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cnn_lens

#include "cnn_lens/api.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "cnn_lens/errors.hpp"
#include "cnn_lens/trace_io.hpp"
#include "json.hpp"
#include "json_writer.hpp"

namespace cnn_lens {
namespace {

using nlohmann::json;
using detail::JsonWriter;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read preset '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t demo_field(const json& req, const char* key, std::size_t min_value) {
  auto it = req.find(key);
  if (it == req.end()) throw ConfigError(std::string("conv-demo: missing '") + key + "'");
  if (!it->is_number_integer() || it->get<long long>() < static_cast<long long>(min_value) ||
      it->get<long long>() > static_cast<long long>(kConvDemoMaxSide)) {
    throw ConfigError(std::string("conv-demo: '") + key + "' must be an integer in [" +
                      std::to_string(min_value) + ", " + std::to_string(kConvDemoMaxSide) + "]");
  }
  return it->get<std::size_t>();
}

}  // namespace

Engine::Engine(Model model, const std::filesystem::path& preset_dir) : model_(std::move(model)) {
  if (preset_dir.empty()) return;
  if (!std::filesystem::is_directory(preset_dir)) {
    throw ConfigError("preset directory '" + preset_dir.string() + "' does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(preset_dir)) {
    const auto ext = entry.path().extension().string();
    if (!entry.is_regular_file() || (ext != ".png" && ext != ".jpg" && ext != ".jpeg")) continue;
    presets_.emplace(entry.path().stem().string(), read_bytes(entry.path()));
  }
}

std::vector<std::string> Engine::preset_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, bytes] : presets_) ids.push_back(id);
  return ids;
}

std::string Engine::model_info() const {
  JsonWriter w;
  w.begin_object();
  w.key("format_version").value(kWeightsFormatVersion);
  w.key("fingerprint").value(model_.fingerprint());
  w.key("input_shape").integers<std::size_t>(
      std::vector<std::size_t>{kTinyVggInput.channels, kTinyVggInput.rows, kTinyVggInput.cols});
  w.key("architecture").begin_array();
  for (const auto& spec : model_.layers()) {
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
  w.end_array();
  w.key("class_labels").strings(model_.class_labels());
  w.key("presets").strings(preset_ids());
  w.end_object();
  return w.take();
}

std::string Engine::classify_image(std::span<const std::uint8_t> bytes) const {
  const Tensor3D input = image_to_input(bytes, model_.normalization());
  return serialize_trace(forward(model_, input, "upload"));
}

std::string Engine::classify_preset(std::string_view id) const {
  auto it = presets_.find(id);
  if (it == presets_.end()) throw UnknownPresetError(id);
  const Tensor3D input = image_to_input(it->second, model_.normalization());
  return serialize_trace(forward(model_, input, "preset:" + it->first));
}

std::string Engine::conv_demo(std::string_view request_json) {
  json req;
  try {
    req = json::parse(request_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("conv-demo: ") + e.what());
  }
  if (!req.is_object()) throw ConfigError("conv-demo: expected a JSON object");
  const std::size_t in = demo_field(req, "in", 1);
  const std::size_t kernel = demo_field(req, "kernel", 1);
  const std::size_t stride = demo_field(req, "stride", 1);
  const std::size_t padding = demo_field(req, "padding", 0);

  const ConvHyper h{kernel, stride, padding, 1, 1};
  const ShapeReport report = shape_report(in, in, h);
  JsonWriter w;
  w.begin_object();
  w.key("in").value(in).key("kernel").value(kernel).key("stride").value(stride);
  w.key("padding").value(padding);
  w.key("out").value(report.out_rows);
  w.key("out_rows").value(report.out_rows).key("out_cols").value(report.out_cols);
  w.key("fits_exactly").value(report.fits_exactly).key("valid").value(report.valid);
  w.key("steps").begin_array();
  for (const auto& step : sliding_steps(in, in, h)) {
    w.begin_array().value(step.row).value(step.col).end_array();
  }
  w.end_array();
  w.end_object();
  return w.take();
}

}  // namespace cnn_lens

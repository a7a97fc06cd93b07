// cnn_lens: classify images, inspect convolution shapes, compare traces and
// run the HTTP service.
//
// Exit codes: 0 success, 1 failure (I/O, traces differ), 2 bad flags,
// 3 unreadable/undecodable input, 4 model error, 5 port unavailable.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cnn_lens/errors.hpp"
#include "cnn_lens/layers.hpp"
#include "cnn_lens/model.hpp"
#include "cnn_lens/service.hpp"
#include "cnn_lens/trace_io.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDecode = 3,
  kModel = 4,
  kPortBusy = 5,
};

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct ModelFlags {
  std::string model;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "Weights file (defaults to $CNN_LENS_MODEL)");
    cmd->add_option("--seed", seed, "Use deterministic seeded weights instead of a file");
  }

  // Empty path with no seed means nothing was configured.
  std::filesystem::path path() const {
    auto resolved = cnn_lens::resolve_model_path(
        model.empty() ? std::nullopt : std::optional<std::filesystem::path>(model));
    if (resolved) return *resolved;
    return {};
  }

  bool configured() const { return !path().empty() || seed.has_value(); }
};

int run_classify(const ModelFlags& flags, const std::string& image_path, const std::string& out,
                 CLI::App* cmd) {
  if (!flags.configured()) {
    std::cerr << "classify: --model is required (or set " << cnn_lens::kModelEnvVar << ")\n\n"
              << cmd->help();
    return kUsage;
  }

  std::optional<cnn_lens::Model> model;
  try {
    model.emplace(cnn_lens::load_configured_model(flags.path(), flags.seed));
  } catch (const cnn_lens::Error& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kModel;
  }

  const auto bytes = slurp(image_path);
  if (!bytes) {
    std::cerr << "cannot read image '" << image_path << "'\n";
    return kDecode;
  }
  cnn_lens::Trace trace = [&] {
    const auto* data = reinterpret_cast<const std::uint8_t*>(bytes->data());
    return cnn_lens::forward(*model,
                             cnn_lens::image_to_input({data, bytes->size()}, model->normalization()),
                             "upload");
  }();

  if (!out.empty()) {
    std::ofstream file(out, std::ios::binary);
    file << cnn_lens::serialize_trace(trace);
    if (!file) {
      std::cerr << "cannot write '" << out << "'\n";
      return kFailure;
    }
  }
  const auto& p = *trace.prediction;
  std::cout << p.label << " " << std::setprecision(6) << p.probability << "\n";
  return kOk;
}

int run_shape(std::size_t in_rows, std::size_t in_cols, const cnn_lens::ConvHyper& h) {
  const auto r = cnn_lens::shape_report(in_rows, in_cols, h);
  std::cout << "out=" << r.out_rows << "x" << r.out_cols
            << " fits_exactly=" << (r.fits_exactly ? "true" : "false")
            << " valid=" << (r.valid ? "true" : "false") << "\n";
  if (r.valid && !r.fits_exactly) {
    std::cout << "warning: kernel " << h.kernel_size << " with stride " << h.stride
              << " does not tile the padded input exactly\n";
  }
  return kOk;
}

int run_trace_diff(const std::string& a_path, const std::string& b_path, double tol) {
  std::optional<cnn_lens::Trace> traces[2];
  const std::string paths[2] = {a_path, b_path};
  for (int i = 0; i < 2; ++i) {
    const auto text = slurp(paths[i]);
    if (!text) {
      std::cerr << "cannot read '" << paths[i] << "'\n";
      return kDecode;
    }
    try {
      traces[i].emplace(cnn_lens::deserialize_trace(*text));
    } catch (const cnn_lens::Error& e) {
      std::cerr << paths[i] << ": " << e.what() << "\n";
      return kDecode;
    }
  }

  bool ok = true;
  double worst = 0.0;
  for (const auto& row : cnn_lens::compare_traces(*traces[0], *traces[1])) {
    std::cout << std::left << std::setw(12) << row.name;
    if (!row.comparable) {
      std::cout << "  not comparable\n";
      ok = false;
      continue;
    }
    std::cout << "  output=" << std::setprecision(9) << row.output
              << "  detail=" << row.detail << "\n";
    worst = std::max({worst, static_cast<double>(row.output), static_cast<double>(row.detail)});
  }
  std::cout << "max deviation: " << std::setprecision(9) << worst << "\n";
  return ok && worst <= tol ? kOk : kFailure;
}

int run_serve(const ModelFlags& flags, cnn_lens::ServiceConfig config, CLI::App* cmd) {
  if (!flags.configured()) {
    std::cerr << "serve: --model or --seed is required (or set " << cnn_lens::kModelEnvVar
              << ")\n\n"
              << cmd->help();
    return kUsage;
  }
  config.model_path = flags.path();
  config.seed = flags.seed;
  std::optional<cnn_lens::Service> service;
  try {
    service.emplace(config);
  } catch (const cnn_lens::Error& e) {
    std::cerr << "startup error: " << e.what() << "\n";
    return kModel;
  }
  try {
    const int port = service->bind();
    std::cout << "listening on http://" << config.host << ":" << port << std::endl;
  } catch (const cnn_lens::PortBusyError& e) {
    std::cerr << e.what() << "\n";
    return kPortBusy;
  }
  service->run();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnn_lens: introspectable Tiny VGG forward propagation"};
  app.require_subcommand(1);

  ModelFlags classify_model;
  std::string image_path;
  std::string out_path;
  auto* classify = app.add_subcommand("classify", "Classify an image and write its trace");
  classify_model.attach(classify);
  classify->add_option("--image", image_path, "PNG or JPEG input")->required();
  classify->add_option("--out", out_path, "Where to write the trace document");

  std::size_t in_size = 0;
  std::size_t in_cols = 0;
  cnn_lens::ConvHyper hyper;
  auto* shape = app.add_subcommand("shape", "Convolution output-shape calculator");
  shape->add_option("--in", in_size, "Input side length (rows)")->required()->check(
      CLI::PositiveNumber);
  shape->add_option("--in-cols", in_cols, "Input columns when not square")->check(
      CLI::PositiveNumber);
  shape->add_option("--kernel", hyper.kernel_size, "Kernel size")->required()->check(
      CLI::PositiveNumber);
  shape->add_option("--stride", hyper.stride, "Stride")->required()->check(CLI::PositiveNumber);
  shape->add_option("--pad", hyper.padding, "Zero padding")->check(CLI::NonNegativeNumber);

  std::string diff_a;
  std::string diff_b;
  double tol = std::numeric_limits<double>::infinity();
  auto* diff = app.add_subcommand("trace-diff", "Max per-layer deviation between two traces");
  diff->add_option("first", diff_a, "Trace document")->required();
  diff->add_option("second", diff_b, "Trace document")->required();
  diff->add_option("--tol", tol, "Fail (exit 1) when any deviation exceeds this");

  ModelFlags serve_model;
  cnn_lens::ServiceConfig serve_config;
  std::string presets;
  std::string ui;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve_model.attach(serve);
  serve->add_option("--port", serve_config.port, "Port (0 picks a free one)");
  serve->add_option("--host", serve_config.host, "Bind address");
  serve->add_option("--presets", presets, "Directory of preset images");
  serve->add_option("--ui", ui, "Static UI bundle served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*classify) return run_classify(classify_model, image_path, out_path, classify);
    if (*shape) return run_shape(in_size, in_cols ? in_cols : in_size, hyper);
    if (*diff) return run_trace_diff(diff_a, diff_b, tol);
    if (*serve) {
      serve_config.preset_dir = presets;
      serve_config.ui_dir = ui;
      return run_serve(serve_model, serve_config, serve);
    }
  } catch (const cnn_lens::DecodeError& e) {
    std::cerr << "decode error: " << e.what() << "\n";
    return kDecode;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cnn_lens/api.hpp"
#include "cnn_lens/errors.hpp"

namespace cnn_lens {

/// Environment variable naming the weights file when no path is given.
inline constexpr const char* kModelEnvVar = "CNN_LENS_MODEL";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  ///< 0 binds an ephemeral port
  std::filesystem::path model_path;
  /// Used when model_path is empty: deterministic seeded weights.
  std::optional<std::uint64_t> seed;
  std::filesystem::path preset_dir;
  /// Static UI bundle served at "/". Empty serves a small index page.
  std::filesystem::path ui_dir;
};

class PortBusyError : public Error {
 public:
  using Error::Error;
};

/// `explicit_path` if set, otherwise $CNN_LENS_MODEL, otherwise nothing.
std::optional<std::filesystem::path> resolve_model_path(
    const std::optional<std::filesystem::path>& explicit_path);

/// Model from a weights file or, failing that, the seeded initialization.
/// Throws ConfigError when neither is configured.
Model load_configured_model(const std::filesystem::path& model_path,
                            std::optional<std::uint64_t> seed);

/// HTTP front end over Engine:
///   GET  /api/model        architecture, labels, presets
///   POST /api/classify     image bytes, or {"preset": id} as JSON -> trace document
///   POST /api/conv-demo    hyperparameter JSON -> shape report + sliding steps
///   GET  /                 UI bundle
/// Requests are served concurrently; the engine is shared read-only.
class Service {
 public:
  /// Loads the model eagerly so a bad configuration fails at startup.
  explicit Service(const ServiceConfig& config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the bound port. Throws
  /// PortBusyError.
  int bind();
  /// Serves until stop() is called. bind() must have succeeded.
  void run();
  void stop();
  bool running() const;

  const Engine& engine() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// bind() + run(); blocks.
void serve(const ServiceConfig& config);

}  // namespace cnn_lens

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cnn_lens {

/// Root of every exception thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, mismatched dimensions or bad arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Malformed weights file or trace document.
class ParseError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// A weights entry whose dimensions disagree with the architecture.
class ShapeMismatchError : public Error {
 public:
  ShapeMismatchError(std::string layer, const std::string& what)
      : Error("shape mismatch in layer '" + layer + "': " + what),
        layer_(std::move(layer)) {}

  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

class UnknownLayerError : public Error {
 public:
  explicit UnknownLayerError(const std::string& name)
      : Error("unknown layer '" + name + "'") {}
};

/// Image bytes that are not a supported or intact raster.
class DecodeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cnn_lens

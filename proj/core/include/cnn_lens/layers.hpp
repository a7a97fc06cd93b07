#pragma once

#include <cstddef>
#include <vector>

#include "cnn_lens/tensor.hpp"

namespace cnn_lens {

/// Square-kernel convolution hyperparameters with symmetric zero padding.
struct ConvHyper {
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;

  /// Throws ConfigError unless kernel_size, stride and both channel counts
  /// are at least one.
  void validate() const;
  friend bool operator==(const ConvHyper&, const ConvHyper&) = default;
};

/// kernels[o] holds in_channels x k x k weights for output channel o.
struct ConvWeights {
  std::vector<Tensor3D> kernels;
  std::vector<float> biases;

  /// Throws ConfigError if dimensions disagree with `h`.
  void check_against(const ConvHyper& h) const;
};

struct ConvResult {
  Tensor3D output;
  /// intermediates[o] is in_channels x out_rows x out_cols: the convolution of
  /// each input channel with kernel [o][in], before summation and bias.
  std::vector<Tensor3D> intermediates;
};

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct PoolResult {
  Tensor3D output;
  /// Source cell in the input channel for each output cell, laid out like
  /// `output`.
  std::vector<Cell> argmax;

  const Cell& source(std::size_t c, std::size_t r, std::size_t k) const {
    return argmax[(c * output.rows() + r) * output.cols() + k];
  }
};

struct Index3 {
  std::size_t channel = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

struct FlattenResult {
  Vector1D output;
  /// index_map[i] is the tensor coordinate stored at vector index i.
  std::vector<Index3> index_map;
};

/// Row-major out x in matrix plus out biases.
struct DenseWeights {
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<float> weights;
  std::vector<float> biases;

  void check() const;
  float weight(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
};

struct SoftmaxResult {
  Vector1D probabilities;
  float max_logit = 0.0f;
  /// exp(logit - max_logit) for each class.
  std::vector<float> terms;
  float normalizer = 0.0f;
};

struct ShapeReport {
  std::size_t out_rows = 0;
  std::size_t out_cols = 0;
  bool fits_exactly = false;
  bool valid = false;
  friend bool operator==(const ShapeReport&, const ShapeReport&) = default;
};

/// Output dims use floor((in + 2p - k) / s) + 1. A misfit (non-zero
/// remainder) is reported, not rejected.
ShapeReport shape_report(std::size_t in_rows, std::size_t in_cols, const ConvHyper& h);

/// Top-left kernel placements in padded-input coordinates, one per output
/// cell, in row-major output order. Empty when the report is invalid.
std::vector<Cell> sliding_steps(std::size_t in_rows, std::size_t in_cols,
                                const ConvHyper& h);

ConvResult conv2d(const Tensor3D& input, const ConvWeights& w, const ConvHyper& h);

/// Sum of elementwise products of two equally sized 1 x k x k tensors.
float single_conv_step(const Tensor3D& patch, const Tensor3D& kernel);

/// The k x k window of `channel` that feeds output cell (out_row, out_col),
/// with zeros where the window covers padding.
Tensor3D extract_patch(const Tensor3D& input, std::size_t channel, std::size_t out_row,
                       std::size_t out_col, const ConvHyper& h);

Tensor3D relu(const Tensor3D& t);

/// Per-channel max pooling; ties resolve to the first cell in row-major order.
PoolResult max_pool(const Tensor3D& t, std::size_t window, std::size_t stride);

/// Channel-major then row-major: (c, r, k) -> c*rows*cols + r*cols + k.
FlattenResult flatten(const Tensor3D& t);
std::size_t flat_index(const Shape3& shape, const Index3& at);

Vector1D dense(const Vector1D& v, const DenseWeights& w);

Vector1D softmax(const Vector1D& logits);
SoftmaxResult softmax_terms(const Vector1D& logits);

}  // namespace cnn_lens

#include "cnn_lens/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cnn_lens/errors.hpp"

namespace cnn_lens {
namespace {

using Signed = std::ptrdiff_t;

std::string dims(const Shape3& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.rows) + "x" +
         std::to_string(s.cols);
}

// Number of kernel placements along one axis, or -1 if none fit.
Signed placements(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  const Signed span = static_cast<Signed>(in + 2 * p) - static_cast<Signed>(k);
  if (span < 0) return -1;
  return span / static_cast<Signed>(s) + 1;
}

}  // namespace

void ConvHyper::validate() const {
  if (kernel_size < 1) throw ConfigError("kernel_size must be >= 1");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (in_channels < 1 || out_channels < 1) {
    throw ConfigError("channel counts must be >= 1");
  }
}

void ConvWeights::check_against(const ConvHyper& h) const {
  if (kernels.size() != h.out_channels) {
    throw ConfigError("expected " + std::to_string(h.out_channels) + " kernels, got " +
                      std::to_string(kernels.size()));
  }
  if (biases.size() != h.out_channels) {
    throw ConfigError("expected " + std::to_string(h.out_channels) + " biases, got " +
                      std::to_string(biases.size()));
  }
  const Shape3 want{h.in_channels, h.kernel_size, h.kernel_size};
  for (const auto& k : kernels) {
    if (k.shape() != want) {
      throw ConfigError("kernel shape " + dims(k.shape()) + ", expected " + dims(want));
    }
  }
  for (float b : biases) {
    if (!std::isfinite(b)) throw ConfigError("non-finite bias");
  }
}

void DenseWeights::check() const {
  if (out == 0 || in == 0) throw ConfigError("dense dimensions must be positive");
  if (weights.size() != out * in) {
    throw ConfigError("dense weight count " + std::to_string(weights.size()) +
                      ", expected " + std::to_string(out * in));
  }
  if (biases.size() != out) {
    throw ConfigError("dense bias count " + std::to_string(biases.size()) +
                      ", expected " + std::to_string(out));
  }
  for (float v : weights) {
    if (!std::isfinite(v)) throw ConfigError("non-finite dense weight");
  }
  for (float v : biases) {
    if (!std::isfinite(v)) throw ConfigError("non-finite dense bias");
  }
}

ShapeReport shape_report(std::size_t in_rows, std::size_t in_cols, const ConvHyper& h) {
  ShapeReport report;
  if (in_rows == 0 || in_cols == 0 || h.kernel_size == 0 || h.stride == 0) return report;
  const Signed rows = placements(in_rows, h.kernel_size, h.stride, h.padding);
  const Signed cols = placements(in_cols, h.kernel_size, h.stride, h.padding);
  if (rows < 1 || cols < 1) return report;
  report.out_rows = static_cast<std::size_t>(rows);
  report.out_cols = static_cast<std::size_t>(cols);
  report.valid = true;
  report.fits_exactly = (in_rows + 2 * h.padding - h.kernel_size) % h.stride == 0 &&
                        (in_cols + 2 * h.padding - h.kernel_size) % h.stride == 0;
  return report;
}

std::vector<Cell> sliding_steps(std::size_t in_rows, std::size_t in_cols,
                                const ConvHyper& h) {
  const auto report = shape_report(in_rows, in_cols, h);
  std::vector<Cell> steps;
  if (!report.valid) return steps;
  steps.reserve(report.out_rows * report.out_cols);
  for (std::size_t r = 0; r < report.out_rows; ++r) {
    for (std::size_t k = 0; k < report.out_cols; ++k) {
      steps.push_back({r * h.stride, k * h.stride});
    }
  }
  return steps;
}

ConvResult conv2d(const Tensor3D& input, const ConvWeights& w, const ConvHyper& h) {
  h.validate();
  if (input.channels() != h.in_channels) {
    throw ConfigError("conv input has " + std::to_string(input.channels()) +
                      " channels, expected " + std::to_string(h.in_channels));
  }
  w.check_against(h);
  const auto report = shape_report(input.rows(), input.cols(), h);
  if (!report.valid) {
    throw ConfigError("kernel " + std::to_string(h.kernel_size) + " does not fit input " +
                      dims(input.shape()));
  }

  const std::size_t out_rows = report.out_rows;
  const std::size_t out_cols = report.out_cols;
  const std::size_t plane = out_rows * out_cols;
  const Signed in_rows = static_cast<Signed>(input.rows());
  const Signed in_cols = static_cast<Signed>(input.cols());
  const Signed pad = static_cast<Signed>(h.padding);
  const std::size_t ks = h.kernel_size;

  std::vector<Tensor3D> intermediates;
  intermediates.reserve(h.out_channels);
  std::vector<float> output(h.out_channels * plane);

  for (std::size_t o = 0; o < h.out_channels; ++o) {
    const Tensor3D& kernel = w.kernels[o];
    std::vector<float> maps(h.in_channels * plane);
    for (std::size_t ic = 0; ic < h.in_channels; ++ic) {
      const float* src = input.channel(ic).data();
      const float* ker = kernel.channel(ic).data();
      float* dst = maps.data() + ic * plane;
      for (std::size_t r = 0; r < out_rows; ++r) {
        const Signed top = static_cast<Signed>(r * h.stride) - pad;
        for (std::size_t k = 0; k < out_cols; ++k) {
          const Signed left = static_cast<Signed>(k * h.stride) - pad;
          float acc = 0.0f;
          for (std::size_t kr = 0; kr < ks; ++kr) {
            const Signed row = top + static_cast<Signed>(kr);
            if (row < 0 || row >= in_rows) continue;
            const float* src_row = src + row * in_cols;
            const float* ker_row = ker + kr * ks;
            for (std::size_t kc = 0; kc < ks; ++kc) {
              const Signed col = left + static_cast<Signed>(kc);
              if (col < 0 || col >= in_cols) continue;
              acc += src_row[col] * ker_row[kc];
            }
          }
          dst[r * out_cols + k] = acc;
        }
      }
    }
    float* out = output.data() + o * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      float acc = 0.0f;
      for (std::size_t ic = 0; ic < h.in_channels; ++ic) acc += maps[ic * plane + i];
      out[i] = acc + w.biases[o];
    }
    intermediates.emplace_back(Shape3{h.in_channels, out_rows, out_cols}, std::move(maps));
  }

  return {Tensor3D({h.out_channels, out_rows, out_cols}, std::move(output)),
          std::move(intermediates)};
}

float single_conv_step(const Tensor3D& patch, const Tensor3D& kernel) {
  if (patch.channels() != 1 || patch.rows() != patch.cols()) {
    throw ConfigError("patch must be a single square matrix, got " + dims(patch.shape()));
  }
  if (patch.shape() != kernel.shape()) {
    throw ConfigError("patch " + dims(patch.shape()) + " and kernel " +
                      dims(kernel.shape()) + " differ in shape");
  }
  float acc = 0.0f;
  const auto p = patch.data();
  const auto k = kernel.data();
  for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * k[i];
  return acc;
}

Tensor3D extract_patch(const Tensor3D& input, std::size_t channel, std::size_t out_row,
                       std::size_t out_col, const ConvHyper& h) {
  const auto report = shape_report(input.rows(), input.cols(), h);
  if (!report.valid || out_row >= report.out_rows || out_col >= report.out_cols) {
    throw IndexError("no kernel placement for output cell (" + std::to_string(out_row) +
                     "," + std::to_string(out_col) + ")");
  }
  const std::size_t ks = h.kernel_size;
  const Signed pad = static_cast<Signed>(h.padding);
  std::vector<float> values(ks * ks, 0.0f);
  for (std::size_t kr = 0; kr < ks; ++kr) {
    const Signed row = static_cast<Signed>(out_row * h.stride + kr) - pad;
    if (row < 0 || row >= static_cast<Signed>(input.rows())) continue;
    for (std::size_t kc = 0; kc < ks; ++kc) {
      const Signed col = static_cast<Signed>(out_col * h.stride + kc) - pad;
      if (col < 0 || col >= static_cast<Signed>(input.cols())) continue;
      values[kr * ks + kc] = input.at(channel, static_cast<std::size_t>(row),
                                      static_cast<std::size_t>(col));
    }
  }
  return Tensor3D({1, ks, ks}, std::move(values));
}

Tensor3D relu(const Tensor3D& t) {
  std::vector<float> out(t.data().begin(), t.data().end());
  for (float& v : out) v = v > 0.0f ? v : 0.0f;
  return Tensor3D(t.shape(), std::move(out));
}

PoolResult max_pool(const Tensor3D& t, std::size_t window, std::size_t stride) {
  const ConvHyper h{window, stride, 0, t.channels(), t.channels()};
  h.validate();
  const auto report = shape_report(t.rows(), t.cols(), h);
  if (!report.valid) {
    throw ConfigError("pool window " + std::to_string(window) + " does not fit input " +
                      dims(t.shape()));
  }
  const Shape3 out_shape{t.channels(), report.out_rows, report.out_cols};
  std::vector<float> out;
  std::vector<Cell> argmax;
  out.reserve(out_shape.size());
  argmax.reserve(out_shape.size());
  for (std::size_t c = 0; c < t.channels(); ++c) {
    for (std::size_t r = 0; r < report.out_rows; ++r) {
      for (std::size_t k = 0; k < report.out_cols; ++k) {
        Cell best{r * stride, k * stride};
        float best_value = t(c, best.row, best.col);
        for (std::size_t wr = 0; wr < window; ++wr) {
          for (std::size_t wc = 0; wc < window; ++wc) {
            const std::size_t row = r * stride + wr;
            const std::size_t col = k * stride + wc;
            // Strict comparison keeps the first maximum in row-major order.
            if (t(c, row, col) > best_value) {
              best_value = t(c, row, col);
              best = {row, col};
            }
          }
        }
        out.push_back(best_value);
        argmax.push_back(best);
      }
    }
  }
  return {Tensor3D(out_shape, std::move(out)), std::move(argmax)};
}

std::size_t flat_index(const Shape3& shape, const Index3& at) {
  if (at.channel >= shape.channels || at.row >= shape.rows || at.col >= shape.cols) {
    throw IndexError("coordinate outside " + dims(shape));
  }
  return (at.channel * shape.rows + at.row) * shape.cols + at.col;
}

FlattenResult flatten(const Tensor3D& t) {
  std::vector<Index3> index_map;
  index_map.reserve(t.size());
  for (std::size_t c = 0; c < t.channels(); ++c) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t k = 0; k < t.cols(); ++k) index_map.push_back({c, r, k});
    }
  }
  return {Vector1D(std::vector<float>(t.data().begin(), t.data().end())),
          std::move(index_map)};
}

Vector1D dense(const Vector1D& v, const DenseWeights& w) {
  w.check();
  if (v.size() != w.in) {
    throw ConfigError("dense input length " + std::to_string(v.size()) + ", expected " +
                      std::to_string(w.in));
  }
  std::vector<float> out(w.out);
  const auto x = v.data();
  for (std::size_t o = 0; o < w.out; ++o) {
    const float* row = w.weights.data() + o * w.in;
    float acc = 0.0f;
    for (std::size_t i = 0; i < w.in; ++i) acc += row[i] * x[i];
    out[o] = acc + w.biases[o];
  }
  return Vector1D(std::move(out));
}

SoftmaxResult softmax_terms(const Vector1D& logits) {
  const auto l = logits.data();
  const float max_logit = *std::max_element(l.begin(), l.end());
  std::vector<float> terms(l.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    terms[i] = std::exp(l[i] - max_logit);
    sum += terms[i];
  }
  const auto normalizer = static_cast<float>(sum);
  std::vector<float> p(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) p[i] = terms[i] / normalizer;
  return {Vector1D(std::move(p)), max_logit, std::move(terms), normalizer};
}

Vector1D softmax(const Vector1D& logits) { return softmax_terms(logits).probabilities; }

}  // namespace cnn_lens

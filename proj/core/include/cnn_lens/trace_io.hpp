#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cnn_lens/model.hpp"

namespace cnn_lens {

inline constexpr int kTraceSchemaVersion = 1;

/// Canonical trace document: fixed key order, no whitespace, reals with 9
/// significant digits. Equal traces always produce identical bytes.
std::string serialize_trace(const Trace& trace);

/// Inverse of serialize_trace. Layer records must follow the Tiny VGG order;
/// a gap raises ParseError naming the missing layer. A document without a
/// prediction may stop early (a forward_partial trace).
Trace deserialize_trace(std::string_view document);

struct LayerDeviation {
  std::string name;
  bool comparable = true;  ///< false when shapes differ or a side lacks the layer
  float output = 0.0f;     ///< max |a - b| over the layer output
  float detail = 0.0f;     ///< max |a - b| over intermediates / softmax terms
};

/// Per-layer max deviation between two traces; the first row is "input".
std::vector<LayerDeviation> compare_traces(const Trace& a, const Trace& b);

}  // namespace cnn_lens

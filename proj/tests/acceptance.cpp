// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Runs on the engine, trace codec and HTTP service only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cnn_lens/image.hpp"
#include "cnn_lens/layers.hpp"
#include "cnn_lens/model.hpp"
#include "cnn_lens/service.hpp"
#include "cnn_lens/trace_io.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "oracles.hpp"

using namespace cnn_lens;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages for a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Verdict verdict(const std::string& summary) const {
    std::ostringstream s;
    s << summary << " (" << checks_ << " checks";
    if (failures_) s << ", " << failures_ << " failed: " << notes_;
    s << ")";
    return {failures_ == 0, s.str()};
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::string notes_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::span<const float> values(const Activation& a) {
  return std::visit([](const auto& t) { return t.data(); }, a);
}

Tensor3D random_input(oracle::Rng& rng) {
  return Tensor3D(kTinyVggInput, rng.floats(kTinyVggInput.size(), 0.0f, 1.0f));
}

Tensor3D preset_input(const char* file) {
  const auto& m = fixtures::reference_model();
  return image_to_input(fixtures::read_file(fixtures::presets() / file), m.normalization());
}

// ---------------------------------------------------------------------------

Verdict shape_chain() {
  const std::vector<Dims> chain = {
      {10, 62, 62}, {10, 62, 62}, {10, 60, 60}, {10, 60, 60}, {10, 30, 30}, {10, 28, 28},
      {10, 28, 28}, {10, 26, 26}, {10, 26, 26}, {10, 13, 13}, {1690},       {10},
      {10}};
  Checker c;
  oracle::Rng rng(101);
  const auto t0 = Clock::now();
  for (const Tensor3D& input : {Tensor3D::zeros(kTinyVggInput), random_input(rng)}) {
    const auto t = forward(fixtures::reference_model(), input);
    c.expect(t.layers.size() == 13, "layer count");
    for (std::size_t i = 0; i < std::min<std::size_t>(13, t.layers.size()); ++i) {
      c.expect(dims_of(t.layers[i].output) == chain[i], t.layers[i].name + " shape");
    }
  }
  const double ms = ms_since(t0);
  c.expect(ms < 1000.0, "runtime " + fmt(ms) + " ms");
  return c.verdict("13 layers, (10,62,62) ... (10,13,13), 1690, 10, 10 in " + fmt(ms) + " ms");
}

Verdict oracle_equivalence() {
  Checker c;
  oracle::Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ConvHyper h;
    h.kernel_size = rng.range(1, 5);
    h.stride = rng.range(1, 3);
    h.padding = rng.range(0, 2);
    h.in_channels = rng.range(1, 4);
    h.out_channels = rng.range(1, 4);
    const std::size_t rows = rng.range(h.kernel_size, 12);
    const std::size_t cols = rng.range(h.kernel_size, 12);
    const auto data = rng.floats(h.in_channels * rows * cols, -1.0f, 1.0f);
    const std::size_t per = h.in_channels * h.kernel_size * h.kernel_size;
    const auto flat_k = rng.floats(h.out_channels * per, -1.0f, 1.0f);
    const auto bias = rng.floats(h.out_channels, -1.0f, 1.0f);
    ConvWeights w;
    for (std::size_t o = 0; o < h.out_channels; ++o) {
      w.kernels.emplace_back(Shape3{h.in_channels, h.kernel_size, h.kernel_size},
                             std::vector<float>(flat_k.begin() + o * per,
                                                flat_k.begin() + (o + 1) * per));
    }
    w.biases = bias;
    std::size_t oh = 0;
    std::size_t ow = 0;
    const auto expect = oracle::naive_conv(data, h.in_channels, rows, cols, flat_k, bias,
                                           h.out_channels, h.kernel_size, h.stride, h.padding,
                                           oh, ow);
    const auto got = conv2d(Tensor3D({h.in_channels, rows, cols}, data), w, h);
    c.expect(got.output.shape() == Shape3{h.out_channels, oh, ow}, "shape");
    if (got.output.size() != expect.size()) continue;
    for (std::size_t i = 0; i < expect.size(); ++i) {
      worst = std::max(worst, std::abs(got.output.data()[i] - expect[i]));
    }
  }
  c.expect(worst <= 1e-5, "max |delta| " + fmt(worst));
  return c.verdict("100 instances, max |delta| = " + fmt(worst) + " <= 1e-5");
}

Verdict intermediate_sums() {
  Checker c;
  oracle::Rng rng(303);
  const auto& m = fixtures::reference_model();
  double worst = 0.0;
  for (int n = 0; n < 10; ++n) {
    const auto t = forward(m, random_input(rng));
    for (const auto& rec : t.layers) {
      if (rec.kind != LayerKind::conv) continue;
      const auto& d = std::get<ConvDetail>(rec.detail);
      const auto& out = std::get<Tensor3D>(rec.output);
      for (std::size_t o = 0; o < out.channels(); ++o) {
        const auto& inter = d.intermediates[o];
        for (std::size_t r = 0; r < out.rows(); ++r) {
          for (std::size_t k = 0; k < out.cols(); ++k) {
            double sum = d.weights.biases[o];
            for (std::size_t ch = 0; ch < inter.channels(); ++ch) sum += inter(ch, r, k);
            worst = std::max(worst, std::abs(sum - out(o, r, k)));
          }
        }
      }
    }
  }
  c.expect(worst <= 1e-5, "max |delta| " + fmt(worst));
  return c.verdict("4 conv layers x 10 inputs, max |delta| = " + fmt(worst) + " <= 1e-5");
}

std::size_t first_argmax(std::span<const float> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Verdict softmax_suite() {
  Checker c;
  oracle::Rng rng(404);
  const float ranges[] = {1.0f, 10.0f, 100.0f, 1000.0f};
  double worst_norm = 0.0;
  double worst_shift = 0.0;
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = rng.range(2, 20);
    const float range = ranges[trial % 4];
    auto logits = rng.floats(n, -range, range);
    if (trial % 50 == 0) logits[rng.range(0, n - 1)] = 1000.0f;

    const auto p = softmax(Vector1D(logits));
    double sum = 0.0;
    for (float v : p.data()) {
      c.expect(std::isfinite(v) && v >= 0.0f && v <= 1.0f, "entry outside [0,1]");
      sum += v;
    }
    worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    c.expect(first_argmax(p.data()) == first_argmax(logits), "argmax changed");

    const auto ref = oracle::softmax(logits);
    for (std::size_t i = 0; i < n; ++i) {
      worst_oracle = std::max(worst_oracle, static_cast<double>(std::abs(ref[i] - p[i])));
    }

    // Shift invariance on logits quantized to 1/256 so both the logits and the
    // shifted logits are exactly representable.
    std::vector<float> q(n);
    std::vector<float> shifted(n);
    const float shift = static_cast<float>(static_cast<int>(rng.range(0, 2000)) - 1000);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = std::round(logits[i] * 256.0f) / 256.0f;
      shifted[i] = q[i] + shift;
    }
    const auto a = softmax(Vector1D(q));
    const auto b = softmax(Vector1D(shifted));
    worst_shift = std::max(worst_shift, static_cast<double>(max_abs_diff(a.data(), b.data())));
  }
  const auto big = softmax(Vector1D({1000.0f, 0.0f}));
  c.expect(std::abs(big[0] - 1.0f) <= 1e-6f && big[1] <= 1e-6f, "[1000, 0]");
  const auto all_big = softmax(Vector1D(std::vector<float>(10, 1000.0f)));
  for (float v : all_big.data()) c.expect(std::abs(v - 0.1f) <= 1e-6f, "ten x 1000");

  c.expect(worst_norm <= 1e-6, "normalization " + fmt(worst_norm));
  c.expect(worst_shift <= 1e-6, "shift " + fmt(worst_shift));
  c.expect(worst_oracle <= 1e-6, "oracle " + fmt(worst_oracle));
  return c.verdict("1000 cases, |sum-1| <= " + fmt(worst_norm) + ", shift delta " +
                   fmt(worst_shift) + ", oracle delta " + fmt(worst_oracle) +
                   ", logits up to 1000 finite");
}

Verdict pool_relu() {
  Checker c;
  oracle::Rng rng(505);
  for (int trial = 0; trial < 1000; ++trial) {
    const Shape3 shape{rng.range(1, 4), rng.range(2, 12), rng.range(2, 12)};
    // Coarse values force plenty of ties.
    auto data = rng.floats(shape.size(), -4.0f, 4.0f);
    if (trial % 2) {
      for (float& v : data) v = std::round(v);
    }
    const Tensor3D t(shape, data);

    const auto r = relu(t);
    const auto rr = relu(r);
    c.expect(bitwise_equal(r.data(), rr.data()), "relu idempotence");
    for (std::size_t i = 0; i < t.size(); ++i) {
      c.expect(r.data()[i] >= 0.0f, "relu negative");
      c.expect(r.data()[i] == std::max(t.data()[i], 0.0f), "relu value");
    }

    const std::size_t window = 2;
    const std::size_t stride = rng.range(1, 2);
    const auto p = max_pool(t, window, stride);
    for (std::size_t ch = 0; ch < p.output.channels(); ++ch) {
      for (std::size_t y = 0; y < p.output.rows(); ++y) {
        for (std::size_t x = 0; x < p.output.cols(); ++x) {
          const float v = p.output(ch, y, x);
          const Cell src = p.source(ch, y, x);
          c.expect(src.row >= y * stride && src.row < y * stride + window &&
                       src.col >= x * stride && src.col < x * stride + window,
                   "argmax outside window");
          c.expect(t(ch, src.row, src.col) == v, "argmax value");
          bool earlier_tie = false;
          for (std::size_t dy = 0; dy < window; ++dy) {
            for (std::size_t dx = 0; dx < window; ++dx) {
              const std::size_t ry = y * stride + dy;
              const std::size_t rx = x * stride + dx;
              c.expect(v >= t(ch, ry, rx), "dominance");
              if (t(ch, ry, rx) == v && std::pair(ry, rx) < std::pair(src.row, src.col)) {
                earlier_tie = true;
              }
            }
          }
          c.expect(!earlier_tie, "tie not resolved to first cell");
        }
      }
    }
  }
  return c.verdict("1000 tensors: pool dominance, argmax consistency, relu idempotence");
}

Verdict flatten_bijection() {
  Checker c;
  oracle::Rng rng(606);
  std::vector<Shape3> shapes{{10, 13, 13}};
  for (int i = 0; i < 20; ++i) shapes.push_back({rng.range(1, 12), rng.range(1, 20), rng.range(1, 20)});
  for (const auto& shape : shapes) {
    const Tensor3D t(shape, rng.floats(shape.size(), -1.0f, 1.0f));
    const auto f = flatten(t);
    c.expect(f.output.size() == shape.size() && f.index_map.size() == shape.size(), "length");
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < f.index_map.size(); ++i) {
      const auto& at = f.index_map[i];
      c.expect(at.channel < shape.channels && at.row < shape.rows && at.col < shape.cols,
               "coordinate out of range");
      seen.insert({at.channel, at.row, at.col});
      c.expect(flat_index(shape, at) == i, "inverse");
      c.expect(f.output[i] == t(at.channel, at.row, at.col), "value");
    }
    c.expect(seen.size() == shape.size(), "not injective");
  }
  return c.verdict("10x13x13 and 20 random shapes");
}

Verdict shape_calculator() {
  Checker c;
  std::size_t cases = 0;
  for (std::size_t in = 1; in <= 16; ++in) {
    for (std::size_t k = 1; k <= 5; ++k) {
      for (std::size_t s = 1; s <= 5; ++s) {
        for (std::size_t p = 0; p <= 3; ++p) {
          ++cases;
          ConvHyper h;
          h.kernel_size = k;
          h.stride = s;
          h.padding = p;
          const auto r = shape_report(in, in, h);
          const auto e = oracle::slide(in, k, s, p);
          const std::string tag = "in=" + std::to_string(in) + " k=" + std::to_string(k) +
                                  " s=" + std::to_string(s) + " p=" + std::to_string(p);
          c.expect(r.valid == (e.count > 0), tag + " valid");
          if (!r.valid) {
            c.expect(sliding_steps(in, in, h).empty(), tag + " steps");
            continue;
          }
          c.expect(r.out_rows == e.count && r.out_cols == e.count, tag + " out");
          c.expect(r.fits_exactly == e.tiles_exactly, tag + " fits_exactly");
          const auto steps = sliding_steps(in, in, h);
          c.expect(steps.size() == e.count * e.count, tag + " step count");
          if (steps.size() == e.count * e.count) {
            c.expect(steps.back() == Cell{(e.count - 1) * s, (e.count - 1) * s}, tag + " last");
          }
        }
      }
    }
  }
  return c.verdict(std::to_string(cases) + " configurations vs sliding enumeration");
}

Verdict trace_round_trip() {
  Checker c;
  double worst = 0.0;
  for (const auto& g : fixtures::golden_presets()) {
    const auto trace = forward(fixtures::reference_model(), preset_input(g.file),
                               std::string("preset:") + g.file);
    c.expect(trace.prediction && trace.prediction->label == g.label,
             std::string(g.file) + " golden label");
    const auto doc = serialize_trace(trace);
    const auto back = deserialize_trace(doc);
    c.expect(serialize_trace(back) == doc, std::string(g.file) + " bytes differ");
    for (const auto& row : compare_traces(back, trace)) {
      c.expect(row.comparable, std::string(g.file) + " " + row.name);
      worst = std::max({worst, static_cast<double>(row.output), static_cast<double>(row.detail)});
    }
  }
  c.expect(worst <= 1e-7, "tensor delta " + fmt(worst));
  return c.verdict("5 golden traces byte-identical, tensor delta " + fmt(worst) + " <= 1e-7");
}

Verdict determinism() {
  Checker c;
  const auto& m = fixtures::reference_model();
  oracle::Rng rng(808);
  const std::vector<Tensor3D> inputs{preset_input("bell_pepper.png"), random_input(rng)};
  for (const auto& input : inputs) {
    const auto a = forward(m, input);
    const auto b = forward(m, input);
    c.expect(serialize_trace(a) == serialize_trace(b), "documents differ");
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      c.expect(bitwise_equal(values(a.layers[i].output), values(b.layers[i].output)),
               a.layers[i].name + " bits differ");
    }
    for (const auto& spec : m.layers()) {
      const auto part = forward_partial(m, input, spec.name);
      c.expect(part.layers.size() == layer_index(spec.name) + 1, spec.name + " length");
      for (std::size_t i = 0; i < part.layers.size(); ++i) {
        c.expect(bitwise_equal(values(part.layers[i].output), values(a.layers[i].output)),
                 spec.name + " prefix");
      }
    }
  }
  return c.verdict("repeat passes bitwise equal; forward_partial is a prefix at all 13 cut points");
}

Verdict ingestion() {
  Checker c;
  oracle::Rng rng(909);
  struct Spec {
    std::size_t w, h, channels;
    bool jpeg;
  };
  const std::vector<Spec> specs{
      {1, 1, 3, false},     {1, 1, 4, false},    {3000, 200, 3, false}, {200, 3000, 3, true},
      {64, 64, 3, false},   {64, 64, 3, true},   {65, 63, 4, false},    {17, 1, 1, false},
      {1, 17, 2, false},    {640, 480, 3, true}, {480, 640, 1, true},   {128, 128, 2, false},
      {99, 100, 4, false},  {31, 7, 3, true},    {2, 1000, 3, false},   {1000, 2, 1, false},
      {256, 256, 4, false}, {63, 64, 1, true},   {300, 299, 3, true},   {5, 5, 4, false}};
  for (const auto& s : specs) {
    std::vector<std::uint8_t> px(s.w * s.h * s.channels);
    for (auto& b : px) b = static_cast<std::uint8_t>(rng.next());
    const auto bytes = s.jpeg ? encode_jpeg(s.w, s.h, s.channels, px, 85)
                              : encode_png(s.w, s.h, s.channels, px);
    const std::string tag = std::to_string(s.w) + "x" + std::to_string(s.h) + "x" +
                            std::to_string(s.channels) + (s.jpeg ? " jpeg" : " png");
    try {
      const auto t = image_to_input(bytes);
      c.expect(t.shape() == kTinyVggInput, tag + " shape");
      for (float v : t.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
          c.expect(false, tag + " value out of range");
          break;
        }
      }
    } catch (const std::exception& e) {
      c.expect(false, tag + ": " + e.what());
    }
  }
  return c.verdict(std::to_string(specs.size()) +
                   " images (PNG gray/gray+alpha/RGB/RGBA, JPEG gray/RGB, 1x1 .. 3000x200)");
}

Verdict performance() {
  Checker c;
  const auto& m = fixtures::reference_model();
  const auto input = preset_input("bell_pepper.png");
  forward(m, input);
  std::vector<double> fwd;
  for (int i = 0; i < 7; ++i) {
    const auto t0 = Clock::now();
    const auto t = forward(m, input);
    fwd.push_back(ms_since(t0));
    c.expect(t.prediction.has_value(), "no prediction");
  }
  std::sort(fwd.begin(), fwd.end());
  const double fwd_median = fwd[fwd.size() / 2];

  ServiceConfig cfg;
  cfg.port = 0;
  cfg.model_path = fixtures::reference_weights();
  Service service(cfg);
  const int port = service.bind();
  std::thread server([&] { service.run(); });
  for (int i = 0; i < 500 && !service.running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  const auto pepper = fixtures::read_file(fixtures::presets() / "bell_pepper.png");
  const std::string body(pepper.begin(), pepper.end());
  std::vector<double> http;
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 5; ++i) {
    const auto t0 = Clock::now();
    auto res = client.Post("/api/classify", body, "image/png");
    http.push_back(ms_since(t0));
    c.expect(res && res->status == 200, "classify request failed");
  }
  service.stop();
  server.join();
  std::sort(http.begin(), http.end());
  const double http_median = http[http.size() / 2];

  c.expect(fwd_median <= 250.0, "forward " + fmt(fwd_median) + " ms");
  c.expect(http_median <= 500.0, "classify " + fmt(http_median) + " ms");
  return c.verdict("traced forward median " + fmt(fwd_median) + " ms <= 250, /api/classify median " +
                   fmt(http_median) + " ms <= 500");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"shape-chain", shape_chain},
      {"conv-oracle-equivalence", oracle_equivalence},
      {"intermediate-sum", intermediate_sums},
      {"softmax-suite", softmax_suite},
      {"pool-relu-properties", pool_relu},
      {"flatten-bijection", flatten_bijection},
      {"shape-calculator", shape_calculator},
      {"trace-round-trip", trace_round_trip},
      {"determinism", determinism},
      {"ingestion-totality", ingestion},
      {"performance", performance},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-24s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}

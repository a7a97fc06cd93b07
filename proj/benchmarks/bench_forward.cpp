#include <benchmark/benchmark.h>

#include <fstream>
#include <iterator>
#include <random>

#include "cnn_lens/image.hpp"
#include "cnn_lens/layers.hpp"
#include "cnn_lens/model.hpp"
#include "cnn_lens/trace_io.hpp"

namespace {

const std::string kAssets = CNN_LENS_BENCH_ASSETS;

std::vector<std::uint8_t> read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const cnn_lens::Model& model() {
  static const auto m = cnn_lens::load_model_file(kAssets + "/reference_weights.json");
  return m;
}

cnn_lens::Tensor3D random_tensor(cnn_lens::Shape3 shape) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(shape.size());
  for (float& x : v) x = u(rng);
  return cnn_lens::Tensor3D(shape, std::move(v));
}

void BM_Forward(benchmark::State& state) {
  const auto input = random_tensor(cnn_lens::kTinyVggInput);
  for (auto _ : state) benchmark::DoNotOptimize(cnn_lens::forward(model(), input));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_Conv2d(benchmark::State& state) {
  const auto input = random_tensor({10, 62, 62});
  const cnn_lens::ConvHyper h{3, 1, 0, 10, 10};
  const auto& w = model().conv_weights("conv_1_2");
  for (auto _ : state) benchmark::DoNotOptimize(cnn_lens::conv2d(input, w, h));
}
BENCHMARK(BM_Conv2d)->Unit(benchmark::kMicrosecond);

void BM_SerializeTrace(benchmark::State& state) {
  const auto trace = cnn_lens::forward(model(), random_tensor(cnn_lens::kTinyVggInput));
  for (auto _ : state) benchmark::DoNotOptimize(cnn_lens::serialize_trace(trace));
}
BENCHMARK(BM_SerializeTrace)->Unit(benchmark::kMillisecond);

void BM_DeserializeTrace(benchmark::State& state) {
  const auto doc =
      cnn_lens::serialize_trace(cnn_lens::forward(model(), random_tensor(cnn_lens::kTinyVggInput)));
  for (auto _ : state) benchmark::DoNotOptimize(cnn_lens::deserialize_trace(doc));
}
BENCHMARK(BM_DeserializeTrace)->Unit(benchmark::kMillisecond);

void BM_ImagePipeline(benchmark::State& state) {
  const auto bytes = read(kAssets + "/presets/school_bus.png");
  for (auto _ : state) benchmark::DoNotOptimize(cnn_lens::image_to_input(bytes));
}
BENCHMARK(BM_ImagePipeline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include "cnn_lens/c_api.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "cnn_lens/api.hpp"
#include "cnn_lens/errors.hpp"

struct cnn_lens_engine {
  cnn_lens::Engine engine;
};

namespace {

thread_local std::string last_error;

int fail(int status, const char* message) {
  last_error = message;
  return status;
}

int emit(const std::string& text, cnn_lens_buffer* out) {
  auto* data = static_cast<std::uint8_t*>(std::malloc(text.size() ? text.size() : 1));
  if (!data) return fail(CNN_LENS_INTERNAL_ERROR, "out of memory");
  std::memcpy(data, text.data(), text.size());
  out->data = data;
  out->size = text.size();
  return CNN_LENS_OK;
}

template <typename Fn>
int guarded(cnn_lens_buffer* out, Fn&& fn) {
  if (!out) return fail(CNN_LENS_CONFIG_ERROR, "output buffer is null");
  out->data = nullptr;
  out->size = 0;
  try {
    return emit(fn(), out);
  } catch (const cnn_lens::DecodeError& e) {
    return fail(CNN_LENS_DECODE_ERROR, e.what());
  } catch (const cnn_lens::ConfigError& e) {
    return fail(CNN_LENS_CONFIG_ERROR, e.what());
  } catch (const std::exception& e) {
    return fail(CNN_LENS_INTERNAL_ERROR, e.what());
  }
}

}  // namespace

extern "C" {

cnn_lens_engine* cnn_lens_engine_create(const uint8_t* weights, size_t size) {
  if (!weights) {
    last_error = "weights buffer is null";
    return nullptr;
  }
  try {
    auto model = cnn_lens::load_model({reinterpret_cast<const char*>(weights), size});
    return new cnn_lens_engine{cnn_lens::Engine(std::move(model))};
  } catch (const std::exception& e) {
    last_error = e.what();
    return nullptr;
  }
}

cnn_lens_engine* cnn_lens_engine_create_seeded(uint64_t seed) {
  try {
    return new cnn_lens_engine{cnn_lens::Engine(cnn_lens::seeded_model(seed))};
  } catch (const std::exception& e) {
    last_error = e.what();
    return nullptr;
  }
}

void cnn_lens_engine_destroy(cnn_lens_engine* engine) { delete engine; }

int cnn_lens_model_info(const cnn_lens_engine* engine, cnn_lens_buffer* out) {
  if (!engine) return fail(CNN_LENS_MODEL_ERROR, "engine is null");
  return guarded(out, [&] { return engine->engine.model_info(); });
}

int cnn_lens_classify(const cnn_lens_engine* engine, const uint8_t* image, size_t size,
                      cnn_lens_buffer* out) {
  if (!engine) return fail(CNN_LENS_MODEL_ERROR, "engine is null");
  if (!image && size) return fail(CNN_LENS_CONFIG_ERROR, "image buffer is null");
  return guarded(out, [&] { return engine->engine.classify_image({image, size}); });
}

int cnn_lens_conv_demo(const uint8_t* request, size_t size, cnn_lens_buffer* out) {
  if (!request && size) return fail(CNN_LENS_CONFIG_ERROR, "request buffer is null");
  return guarded(out, [&] {
    return cnn_lens::Engine::conv_demo({reinterpret_cast<const char*>(request), size});
  });
}

void cnn_lens_buffer_free(cnn_lens_buffer* buffer) {
  if (!buffer) return;
  std::free(buffer->data);
  buffer->data = nullptr;
  buffer->size = 0;
}

const char* cnn_lens_last_error(void) { return last_error.c_str(); }

}  // extern "C"

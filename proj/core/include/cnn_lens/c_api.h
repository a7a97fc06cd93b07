/* Embedded call boundary over byte buffers, for hosts such as a WebAssembly
 * build of the engine running inside a browser. Each call mirrors an HTTP
 * endpoint and returns the identical JSON document. */
#ifndef CNN_LENS_C_API_H_
#define CNN_LENS_C_API_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cnn_lens_engine cnn_lens_engine;

typedef struct cnn_lens_buffer {
  uint8_t* data;
  size_t size;
} cnn_lens_buffer;

enum cnn_lens_status {
  CNN_LENS_OK = 0,
  CNN_LENS_CONFIG_ERROR = 1,
  CNN_LENS_DECODE_ERROR = 2,
  CNN_LENS_MODEL_ERROR = 3,
  CNN_LENS_INTERNAL_ERROR = 4
};

/* Returns NULL on failure; see cnn_lens_last_error(). */
cnn_lens_engine* cnn_lens_engine_create(const uint8_t* weights, size_t size);
cnn_lens_engine* cnn_lens_engine_create_seeded(uint64_t seed);
void cnn_lens_engine_destroy(cnn_lens_engine* engine);

/* GET /api/model */
int cnn_lens_model_info(const cnn_lens_engine* engine, cnn_lens_buffer* out);
/* POST /api/classify with image bytes */
int cnn_lens_classify(const cnn_lens_engine* engine, const uint8_t* image, size_t size,
                      cnn_lens_buffer* out);
/* POST /api/conv-demo */
int cnn_lens_conv_demo(const uint8_t* request, size_t size, cnn_lens_buffer* out);

void cnn_lens_buffer_free(cnn_lens_buffer* buffer);

/* Message for the most recent failure on the calling thread. */
const char* cnn_lens_last_error(void);

#ifdef __cplusplus
}
#endif

#endif /* CNN_LENS_C_API_H_ */

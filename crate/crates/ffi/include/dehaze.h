#ifndef DEHAZE_H
#define DEHAZE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Set in [`DhReport::flags`] when the original has no visible edges.
#define DH_FLAG_NO_ORIGINAL_EDGES 1

// Set in [`DhReport::flags`] when the restored image has no visible edges.
#define DH_FLAG_EMPTY_EDGE_MASK 2

// Result code of every fallible call. Zero is success.
typedef enum DhStatus {
  DH_STATUS_OK = 0,
  DH_STATUS_NULL_POINTER = 1,
  DH_STATUS_INVALID_ARGUMENT = 2,
  DH_STATUS_NOT_FOUND = 3,
  DH_STATUS_DECODE = 4,
  DH_STATUS_IO = 5,
  DH_STATUS_SHAPE = 6,
  DH_STATUS_DEGENERATE_IMAGE = 7,
  DH_STATUS_RANGE = 8,
  DH_STATUS_SIZE_GUARD = 9,
  DH_STATUS_SOLVER = 10,
  DH_STATUS_CONFIG = 11,
  DH_STATUS_PANIC = 12,
} DhStatus;

// Opaque pipeline configuration.
typedef struct DhConfig DhConfig;

// Opaque RGB image with samples in [0, 1].
typedef struct DhImage DhImage;

// Blind quality metrics of a restored image against its original.
typedef struct DhReport {
  double e;
  double sigma;
  double r_bar;
  // Bitwise OR of `DH_FLAG_*` values.
  uint32_t flags;
} DhReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null if none.
// The pointer stays valid until the next failing call on this thread.
const char *dh_last_error_message(void);

// Creates an image from interleaved 8-bit RGB, row-major, `len` bytes.
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum DhStatus dh_image_from_rgb8(size_t width,
                                 size_t height,
                                 const uint8_t *data,
                                 size_t len,
                                 struct DhImage **out);

// Creates an image from interleaved RGB samples in [0, 1], row-major.
//
// # Safety
// `data` must point to `len` readable doubles; `out` must be writable.
enum DhStatus dh_image_from_f64(size_t width,
                                size_t height,
                                const double *data,
                                size_t len,
                                struct DhImage **out);

// Loads a PNG, JPEG or binary PPM file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DhStatus dh_image_load(const char *path, struct DhImage **out);

// Writes the image as an 8-bit PNG.
//
// # Safety
// `img` must be a live handle; `path` a NUL-terminated string.
enum DhStatus dh_image_save(const struct DhImage *img, const char *path);

// Width in pixels, or 0 for a null handle.
//
// # Safety
// `img` must be null or a live handle.
size_t dh_image_width(const struct DhImage *img);

// Height in pixels, or 0 for a null handle.
//
// # Safety
// `img` must be null or a live handle.
size_t dh_image_height(const struct DhImage *img);

// Copies the interleaved samples into `out`, which must hold exactly
// `width * height * 3` doubles.
//
// # Safety
// `img` must be a live handle; `out` must point to `len` writable doubles.
enum DhStatus dh_image_copy_f64(const struct DhImage *img, double *out, size_t len);

// Copies the image quantized to 8 bits into `out` (`width * height * 3` bytes).
//
// # Safety
// `img` must be a live handle; `out` must point to `len` writable bytes.
enum DhStatus dh_image_copy_rgb8(const struct DhImage *img, uint8_t *out, size_t len);

// Releases an image. Null is ignored.
//
// # Safety
// `img` must be null or a handle not yet freed.
void dh_image_free(struct DhImage *img);

// Default configuration: constant λ = 0.35 with CLAHE.
//
// # Safety
// `out` must be writable.
enum DhStatus dh_config_default(struct DhConfig **out);

// Parses a JSON pipeline configuration (same schema as the CLI `--config`
// file) and validates it.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum DhStatus dh_config_from_json(const char *json, struct DhConfig **out);

// Releases a configuration. Null is ignored.
//
// # Safety
// `cfg` must be null or a handle not yet freed.
void dh_config_free(struct DhConfig *cfg);

// Runs the full pipeline and stores the final image in `*out`.
//
// # Safety
// `img` and `cfg` must be live handles; `out` must be writable.
enum DhStatus dh_run(const struct DhImage *img, const struct DhConfig *cfg, struct DhImage **out);

// Computes e, Σ and r̄ of `restored` against `original`.
//
// # Safety
// Both images must be live handles; `out` must be writable.
enum DhStatus dh_evaluate(const struct DhImage *original,
                          const struct DhImage *restored,
                          struct DhReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEHAZE_H */

#ifndef CHANPRED_H
#define CHANPRED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChanpredStatus {
  CHANPRED_STATUS_OK = 0,
  CHANPRED_STATUS_NULL_POINTER = 1,
  CHANPRED_STATUS_INVALID_ARGUMENT = 2,
  CHANPRED_STATUS_CONFIG = 3,
  CHANPRED_STATUS_TRACE = 4,
  CHANPRED_STATUS_SHAPE = 5,
  CHANPRED_STATUS_NUMERIC = 6,
  CHANPRED_STATUS_IO = 7,
  CHANPRED_STATUS_FORMAT = 8,
  CHANPRED_STATUS_BUFFER_TOO_SMALL = 9,
  CHANPRED_STATUS_PANIC = 10,
} ChanpredStatus;

/**
 * Opaque handle to a model.
 */
typedef struct ChanpredModel ChanpredModel;

/**
 * Opaque handle to a sampled trace.
 */
typedef struct ChanpredTrace ChanpredTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating to `cap` bytes. Returns the length
 * needed including the terminator, or 0 if there is no error.
 *
 * # Safety
 * `buf` must be valid for `cap` writable bytes or null with `cap == 0`.
 */
size_t chanpred_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chanpred_version(void);

/**
 * Simulates the linear power of a Clarke fading channel.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum ChanpredStatus chanpred_trace_simulate(double doppler_hz,
                                            size_t num_sinusoids,
                                            double duration_s,
                                            double sample_rate_hz,
                                            double rician_k,
                                            uint64_t seed,
                                            struct ChanpredTrace **out);

/**
 * Wraps a copy of `len` samples.
 *
 * # Safety
 * `samples` must be valid for `len` reads; `out` must be writable.
 */
enum ChanpredStatus chanpred_trace_from_samples(const double *samples,
                                                size_t len,
                                                double sample_rate_hz,
                                                struct ChanpredTrace **out);

/**
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t chanpred_trace_len(const struct ChanpredTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle or null.
 */
double chanpred_trace_sample_rate(const struct ChanpredTrace *trace);

/**
 * Copies the samples into `buf`, which must hold the whole trace.
 *
 * # Safety
 * `trace` must be a live handle; `buf` must be valid for `cap` writes.
 */
enum ChanpredStatus chanpred_trace_copy_samples(const struct ChanpredTrace *trace,
                                                double *buf,
                                                size_t cap);

/**
 * Block-mean downsampling into a new handle.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChanpredStatus chanpred_trace_downsample(const struct ChanpredTrace *trace,
                                              size_t factor,
                                              struct ChanpredTrace **out);

/**
 * Small-scale fading (trace divided by its local mean) into a new handle.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChanpredStatus chanpred_trace_small_scale(const struct ChanpredTrace *trace,
                                               size_t window,
                                               struct ChanpredTrace **out);

/**
 * Seconds until the autocorrelation first falls to `threshold`. A
 * `max_lag` of 0 selects the default search range.
 *
 * # Safety
 * `trace` must be a live handle; `out_s` must be writable.
 */
enum ChanpredStatus chanpred_trace_coherence_time(const struct ChanpredTrace *trace,
                                                  double threshold,
                                                  size_t max_lag,
                                                  double *out_s);

/**
 * Whole samples covered by a coherence time, at least one.
 */
size_t chanpred_output_length_for(double coherence_time_s, double sample_rate_hz);

/**
 * # Safety
 * `trace` must be a handle from this library, not yet freed, or null.
 */
void chanpred_trace_free(struct ChanpredTrace *trace);

/**
 * Builds an untrained model with default sizes for the family
 * (`linear`, `ffn`, `lstm`, `gru` or `cnn1d`).
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out` must be writable.
 */
enum ChanpredStatus chanpred_model_new(const char *family,
                                       size_t layers,
                                       size_t input_len,
                                       size_t output_len,
                                       uint64_t seed,
                                       struct ChanpredModel **out);

/**
 * Loads a model file written by the toolkit.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ChanpredStatus chanpred_model_load(const char *path, struct ChanpredModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum ChanpredStatus chanpred_model_save(const struct ChanpredModel *model, const char *path);

/**
 * # Safety
 * `model` must be a live handle or null.
 */
size_t chanpred_model_input_len(const struct ChanpredModel *model);

/**
 * # Safety
 * `model` must be a live handle or null.
 */
size_t chanpred_model_output_len(const struct ChanpredModel *model);

/**
 * # Safety
 * `model` must be a live handle or null.
 */
size_t chanpred_model_parameter_count(const struct ChanpredModel *model);

/**
 * Predicts `rows` windows stored row-major in `inputs`
 * (`rows * input_len` values) into `outputs` (`rows * output_len`).
 *
 * # Safety
 * `model` must be a live handle; `inputs` valid for `rows * input_len`
 * reads; `outputs` valid for `out_cap` writes.
 */
enum ChanpredStatus chanpred_model_predict(const struct ChanpredModel *model,
                                           const double *inputs,
                                           size_t rows,
                                           double *outputs,
                                           size_t out_cap);

/**
 * # Safety
 * `model` must be a handle from this library, not yet freed, or null.
 */
void chanpred_model_free(struct ChanpredModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHANPRED_H */

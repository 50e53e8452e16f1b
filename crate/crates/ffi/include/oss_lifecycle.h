#ifndef OSS_LIFECYCLE_H
#define OSS_LIFECYCLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum OlcStatus {
  OLC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OLC_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  OLC_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed input data, archive, model file or argument value.
   */
  OLC_STATUS_DATA_ERROR = 3,
  /**
   * Input width does not match the model.
   */
  OLC_STATUS_DIMENSION_MISMATCH = 4,
  /**
   * The model cannot produce the requested output.
   */
  OLC_STATUS_UNSUPPORTED = 5,
  /**
   * I/O or other runtime failure.
   */
  OLC_STATUS_RUNTIME_ERROR = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  OLC_STATUS_PANIC = 7,
} OlcStatus;

/**
 * Loaded classification model.
 */
typedef struct OlcModel OlcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *olc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *olc_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void olc_string_free(char *s);

/**
 * Loads a `model.json` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OlcStatus olc_model_load(const char *path, struct OlcModel **out);

/**
 * Parses a model document from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OlcStatus olc_model_from_json(const char *json, struct OlcModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from `olc_model_load` or `olc_model_from_json` and not
 * have been freed.
 */
void olc_model_free(struct OlcModel *model);

/**
 * Number of input columns, or 0 for a null model.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t olc_model_n_features(const struct OlcModel *model);

/**
 * Number of classes, or 0 for a null model.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t olc_model_n_classes(const struct OlcModel *model);

/**
 * Stage code (0 sandbox, 1 incubating, 2 graduated) of class column `i`,
 * or -1 when out of range.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
int32_t olc_model_class_code(const struct OlcModel *model, size_t i);

/**
 * Name of input column `i`, owned by the model, or null when out of range.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *olc_model_feature_name(const struct OlcModel *model, size_t i);

/**
 * Predicts stage codes for `n_rows` row-major rows of `n_cols` values.
 *
 * # Safety
 * `x` must hold `n_rows * n_cols` doubles and `out` room for `n_rows` values.
 */
enum OlcStatus olc_model_predict(const struct OlcModel *model,
                                 const double *x,
                                 size_t n_rows,
                                 size_t n_cols,
                                 uint32_t *out);

/**
 * Class probabilities, row-major with columns in `olc_model_class_code`
 * order. SVM models give `OLC_STATUS_UNSUPPORTED`.
 *
 * # Safety
 * `x` must hold `n_rows * n_cols` doubles and `out` room for
 * `n_rows * olc_model_n_classes(model)` doubles.
 */
enum OlcStatus olc_model_predict_proba(const struct OlcModel *model,
                                       const double *x,
                                       size_t n_rows,
                                       size_t n_cols,
                                       double *out);

/**
 * Number of metrics in a feature vector.
 */
size_t olc_metric_count(void);

/**
 * Static name of metric `i`, or null when out of range.
 */
const char *olc_metric_name(size_t i);

/**
 * Computes the metric vector of an on-disk archive into `out`, which must
 * hold `olc_metric_count()` doubles. `window_end` is an RFC 3339 timestamp
 * or null for the archive's own window; `recency_days` sets the
 * new-contributor window.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be large enough.
 */
enum OlcStatus olc_features_from_archive(const char *archive,
                                         const char *window_end,
                                         int64_t recency_days,
                                         double *out);

/**
 * Smallest number of authors whose commits reach `threshold` of the total.
 *
 * # Safety
 * `counts` must hold `n` values and `out` must be valid.
 */
enum OlcStatus olc_bus_factor(const uint64_t *counts, size_t n, double threshold, uint64_t *out);

/**
 * Classification report as JSON from a `k x k` row-major confusion matrix
 * (rows actual, columns predicted) over stage codes `labels`.
 *
 * # Safety
 * `labels` must hold `k` values, `counts` `k * k` values; `out` must be valid.
 * The returned string is released with `olc_string_free`.
 */
enum OlcStatus olc_report_json(const uint32_t *labels,
                               const uint64_t *counts,
                               size_t k,
                               char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSS_LIFECYCLE_H */

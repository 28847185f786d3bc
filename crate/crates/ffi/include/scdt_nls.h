#ifndef SCDT_NLS_H
#define SCDT_NLS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes shared by all functions.
 */
typedef enum ScdtStatus {
  SCDT_STATUS_OK = 0,
  SCDT_STATUS_NULL_POINTER = 1,
  SCDT_STATUS_INVALID_ARGUMENT = 2,
  SCDT_STATUS_INVALID_SIGNAL = 3,
  SCDT_STATUS_DIMENSION_MISMATCH = 4,
  SCDT_STATUS_BUFFER_TOO_SMALL = 5,
  SCDT_STATUS_IO = 6,
  SCDT_STATUS_MODEL_FORMAT = 7,
  SCDT_STATUS_INTEGRITY = 8,
  SCDT_STATUS_PANIC = 9,
} ScdtStatus;

/*
 Trained NLS classifier.
 */
typedef struct ScdtModel ScdtModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null after a
 successful call. The pointer stays valid until the next call into this
 library from the same thread.
 */
const char *scdt_last_error_message(void);

/*
 Library version as a static nul-terminated string.
 */
const char *scdt_version(void);

/*
 Writes the flattened SCDT feature `[pos quantiles, pos mass, neg quantiles,
 neg mass]` of `samples` (taken on `t0 + i * dt`) into `out`, which must
 hold `2 * quantiles + 2` values.

 # Safety
 `samples` must point to `length` readable values and `out` to `out_len`
 writable values.
 */
enum ScdtStatus scdt_transform(const double *samples,
                               size_t length,
                               double t0,
                               double dt,
                               size_t quantiles,
                               double *out,
                               size_t out_len);

/*
 Band-constrained DTW distance between two series of equal length.

 # Safety
 `a` and `b` must each point to `length` readable values.
 */
enum ScdtStatus scdt_dtw_distance(const double *a,
                                  const double *b,
                                  size_t length,
                                  size_t window,
                                  double *out_distance);

/*
 Trains an NLS model on `n_series` series of `length` samples stored
 row-major in `data`, on the unit interval. `labels` holds one label per
 series; classes are the distinct labels in ascending order.

 `quantiles` of 0 uses `length`. On success `*out_model` receives a handle
 to free with [`scdt_model_free`].

 # Safety
 `data` must point to `n_series * length` values, `labels` to `n_series`
 values and `out_model` to writable storage for one pointer.
 */
enum ScdtStatus scdt_model_train(const double *data,
                                 size_t n_series,
                                 size_t length,
                                 const double *labels,
                                 size_t quantiles,
                                 size_t k,
                                 size_t harmonic_order,
                                 bool use_translation,
                                 double variance_cutoff,
                                 struct ScdtModel **out_model);

/*
 Loads a model saved by [`scdt_model_save`] or the command line tool.

 # Safety
 `path` must be a nul-terminated string and `out_model` writable.
 */
enum ScdtStatus scdt_model_load(const char *path, struct ScdtModel **out_model);

/*
 # Safety
 `model` must be a live handle and `path` a nul-terminated string.
 */
enum ScdtStatus scdt_model_save(const struct ScdtModel *model, const char *path);

/*
 Classifies one series of `length` samples. Writes the predicted label
 and, when `residuals` is not null, the squared residual of every class
 (`residuals_len` must be at least the class count).

 # Safety
 `model` must be a live handle, `samples` must hold `length` values,
 `out_label` must be writable and `residuals` null or `residuals_len`
 writable values.
 */
enum ScdtStatus scdt_model_predict(const struct ScdtModel *model,
                                   const double *samples,
                                   size_t length,
                                   double *out_label,
                                   double *residuals,
                                   size_t residuals_len);

/*
 # Safety
 `model` must be a live handle and `out_count` writable.
 */
enum ScdtStatus scdt_model_class_count(const struct ScdtModel *model, size_t *out_count);

/*
 Copies the class labels, in class index order, into `out`.

 # Safety
 `model` must be a live handle and `out` must hold `out_len` values.
 */
enum ScdtStatus scdt_model_class_labels(const struct ScdtModel *model, double *out, size_t out_len);

/*
 Series length the model was trained on.

 # Safety
 `model` must be a live handle and `out_length` writable.
 */
enum ScdtStatus scdt_model_length(const struct ScdtModel *model, size_t *out_length);

/*
 Releases a model. Null is ignored.

 # Safety
 `model` must be null or a handle not yet freed.
 */
void scdt_model_free(struct ScdtModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCDT_NLS_H */

#ifndef NEUCREDIT_H
#define NEUCREDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define NC_OK 0

#define NC_ERR_NULL -1

#define NC_ERR_INVALID_ARG -2

#define NC_ERR_IO -3

#define NC_ERR_DATA -4

#define NC_ERR_NUMERIC -5

#define NC_ERR_BUFFER_TOO_SMALL -6

#define NC_ERR_INTERNAL -255

// A trained model loaded from a checkpoint.
typedef struct NcModel NcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *nc_version(void);

// Copy the calling thread's last error message into `buf`.
//
// # Safety
// `buf` must point to `cap` writable bytes; `out_len` may be null.
int32_t nc_last_error_message(char *buf, size_t cap, size_t *out_len);

// Load a checkpoint file into a new model handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
int32_t nc_model_load(const char *path, struct NcModel **out);

// Release a model handle. Null is ignored.
//
// # Safety
// `model` must come from [`nc_model_load`] and not be used afterwards.
void nc_model_free(struct NcModel *model);

// Score line-delimited dataset records with a model.
//
// Writes a JSON array of `{"id", "step", "y_hat", "parts"?}` objects, one
// per loan, into `buf`. `parts` holds `[y_a, y_w, y_b]` for models with the
// decomposed head. When `buf` is too small the call fails with
// `NC_ERR_BUFFER_TOO_SMALL` and `out_len` holds the size needed.
//
// # Safety
// `model` must be a live handle, `records` a NUL-terminated string, `buf`
// `cap` writable bytes and `out_len` null or valid.
int32_t nc_model_score_json(const struct NcModel *model,
                            const char *records,
                            char *buf,
                            size_t cap,
                            size_t *out_len);

// Generate a synthetic dataset file; `out_fraction` (nullable) receives the
// share of positive steps.
//
// # Safety
// `path` must be a NUL-terminated string; `out_fraction` null or valid.
int32_t nc_generate_synthetic(size_t n,
                              size_t len,
                              uint64_t seed,
                              const char *path,
                              double *out_fraction);

// Area under the ROC curve of `n` scores against 0/1 labels.
//
// # Safety
// `scores` and `labels` must hold `n` elements; `out` must be valid.
int32_t nc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUCREDIT_H */

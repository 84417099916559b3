/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HSKETCH_H
#define HSKETCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_INVALID_ARGUMENT = 1,
  HS_STATUS_DIMENSION_MISMATCH = 2,
  HS_STATUS_LEVEL_NOT_BUILT = 3,
  HS_STATUS_FACTORIZATION = 4,
  HS_STATUS_IO = 5,
  HS_STATUS_FORMAT = 6,
  HS_STATUS_NULL_POINTER = 7,
  HS_STATUS_CALLBACK = 8,
  HS_STATUS_PANIC = 9,
} HsStatus;

typedef enum HsFormat {
  HS_FORMAT_HODLR = 1,
  HS_FORMAT_HBS = 2,
  HS_FORMAT_HBS_ID = 3,
} HsFormat;

/**
 * A compressed matrix in one of the three formats.
 */
typedef struct HsMatrix HsMatrix;

/**
 * Operator sampled by the compressors.
 */
typedef struct HsOracle HsOracle;

/**
 * Computes `y = A x` (or `A^* x`) for an `n x cols` column-major block.
 * Returns 0 on success; any other value aborts the calling operation with
 * `HS_STATUS_CALLBACK`.
 */
typedef int (*HsApplyFn)(void *user_data, const double *x, size_t n, size_t cols, double *y);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hs_last_error(char *buf, size_t len);

/**
 * Wraps a copy of the column-major `n x n` array `data`.
 *
 * # Safety
 * `data` must point to `n * n` doubles; `out` must be writable.
 */
enum HsStatus hs_oracle_dense(size_t n, const double *data, struct HsOracle **out);

/**
 * Wraps user callbacks for `A` and `A^*`. Both may be invoked from any
 * thread while the oracle is alive.
 *
 * # Safety
 * The callbacks must write `n * cols` doubles to `y` and be safe to call
 * with `user_data` until the oracle is freed.
 */
enum HsStatus hs_oracle_callback(size_t n,
                                 HsApplyFn apply,
                                 HsApplyFn apply_adjoint,
                                 void *user_data,
                                 struct HsOracle **out);

/**
 * # Safety
 * `oracle` must be null or a handle from an `hs_oracle_*` constructor.
 */
void hs_oracle_free(struct HsOracle *oracle);

/**
 * Compresses `oracle` on a tree with leaves of at most `leaf_size` indices.
 * `format` is one of the `HsFormat` values.
 *
 * # Safety
 * `oracle` must be a live handle; `out` must be writable.
 */
enum HsStatus hs_compress(const struct HsOracle *oracle,
                          size_t leaf_size,
                          uint32_t format,
                          size_t sample_width,
                          double eps,
                          uint64_t seed,
                          struct HsMatrix **out);

/**
 * # Safety
 * `matrix` must be null or a handle from `hs_compress` / `hs_matrix_load`.
 */
void hs_matrix_free(struct HsMatrix *matrix);

/**
 * Side length `N`, or 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
size_t hs_matrix_dim(const struct HsMatrix *matrix);

/**
 * Number of tree levels below the root, or 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
size_t hs_matrix_levels(const struct HsMatrix *matrix);

/**
 * Largest off-diagonal rank, or 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
size_t hs_matrix_max_rank(const struct HsMatrix *matrix);

/**
 * Bytes of stored floating-point data, or 0 for a null handle.
 *
 * # Safety
 * `matrix` must be null or a live handle.
 */
size_t hs_matrix_storage_bytes(const struct HsMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle; `format` must be writable.
 */
enum HsStatus hs_matrix_format(const struct HsMatrix *matrix, enum HsFormat *format);

/**
 * `y = A x`, `A^* x` when `adjoint` is nonzero. `x` and `y` are `N x cols`
 * column-major and must not overlap.
 *
 * # Safety
 * `x` must hold and `y` must have room for `N * cols` doubles.
 */
enum HsStatus hs_matrix_apply(const struct HsMatrix *matrix,
                              const double *x,
                              size_t cols,
                              int adjoint,
                              double *y);

/**
 * Applies only the sibling blocks on levels `1..=level`, without the
 * diagonal blocks. Level 0 is the zero map.
 *
 * # Safety
 * As for [`hs_matrix_apply`].
 */
enum HsStatus hs_matrix_apply_truncated(const struct HsMatrix *matrix,
                                        size_t level,
                                        const double *x,
                                        size_t cols,
                                        int adjoint,
                                        double *y);

/**
 * Writes the binary container atomically.
 *
 * # Safety
 * `matrix` must be a live handle and `path` a NUL-terminated string.
 */
enum HsStatus hs_matrix_save(const struct HsMatrix *matrix, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HsStatus hs_matrix_load(const char *path, struct HsMatrix **out);

/**
 * Runs the structural checks; `*valid` is set to 1 when all pass.
 *
 * # Safety
 * `matrix` must be a live handle; `valid` must be writable.
 */
enum HsStatus hs_matrix_validate(const struct HsMatrix *matrix, int *valid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSKETCH_H */

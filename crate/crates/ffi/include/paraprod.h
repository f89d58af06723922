#ifndef PARAPROD_H
#define PARAPROD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result codes. `Ok` is zero.
 */
typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_SHAPE_MISMATCH = 2,
  PP_STATUS_OUT_OF_RANGE = 3,
  PP_STATUS_NOT_HERMITIAN = 4,
  PP_STATUS_NOT_POSITIVE = 5,
  PP_STATUS_DEGENERATE = 6,
  PP_STATUS_TOO_LARGE = 7,
  /*
   The value written is the best estimate reached.
   */
  PP_STATUS_NO_CONVERGENCE = 8,
  /*
   The value written is the best certified-feasible estimate reached.
   */
  PP_STATUS_SOLVER_STALLED = 9,
  PP_STATUS_INVALID = 10,
  PP_STATUS_IO = 11,
  PP_STATUS_PANIC = 12,
} PpStatus;

typedef enum PpNormKind {
  PP_NORM_KIND_BMO_C = 0,
  PP_NORM_KIND_BMO_R = 1,
  PP_NORM_KIND_BMO_CR = 2,
  PP_NORM_KIND_BMO_M = 3,
  PP_NORM_KIND_H1_MAX = 4,
  /*
   Uses the `p` argument.
   */
  PP_NORM_KIND_LP = 5,
} PpNormKind;

typedef enum PpOperatorKind {
  PP_OPERATOR_KIND_PARAPRODUCT = 0,
  PP_OPERATOR_KIND_PARAPRODUCT_ADJOINT = 1,
  PP_OPERATOR_KIND_HAAR_MULTIPLIER = 2,
} PpOperatorKind;

/*
 Opaque matrix function handle.
 */
typedef struct PpFunction PpFunction;

/*
 Opaque operator handle.
 */
typedef struct PpOperator PpOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length plus one, or 0 if
 the last call succeeded. `buf` may be null to query the length.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t pp_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *pp_version(void);

/*
 Creates a function at resolution `n` with `N = dim` from
 `2 * 2^n * dim^2` interleaved doubles.

 # Safety
 `values` must point to that many readable doubles; `out` must be writable.
 */
enum PpStatus pp_function_new(size_t n,
                              size_t dim,
                              const double *values,
                              struct PpFunction **out_fn);

/*
 Parses the JSON exchange format `{"n", "N", "values"}`.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PpStatus pp_function_from_json(const char *json, struct PpFunction **out_fn);

/*
 Serializes to JSON; release the string with [`pp_string_free`].

 # Safety
 `f` must be a live handle; `out` must be writable.
 */
enum PpStatus pp_function_to_json(const struct PpFunction *f, char **out_str);

/*
 Seeded random function with Gaussian Haar coefficients, level-decaying
 when `level_decay` is true.

 # Safety
 `out` must be writable.
 */
enum PpStatus pp_function_random(uint64_t seed,
                                 size_t n,
                                 size_t dim,
                                 bool level_decay,
                                 struct PpFunction **out_fn);

/*
 # Safety
 `f` must be a live handle; `n` and `dim` must be writable.
 */
enum PpStatus pp_function_shape(const struct PpFunction *f, size_t *n, size_t *dim);

/*
 Copies the interleaved values into `buf`, which must hold `len >=
 2 * 2^n * N^2` doubles.

 # Safety
 `f` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum PpStatus pp_function_values(const struct PpFunction *f, double *buf, size_t len);

/*
 # Safety
 `f` must be null or a handle not freed before.
 */
void pp_function_free(struct PpFunction *f);

/*
 # Safety
 `s` must be null or a string returned by this library, not freed before.
 */
void pp_string_free(char *s);

/*
 Norm of `f`; `p` is read only for [`PpNormKind::Lp`].

 # Safety
 `f` must be a live handle; `value` must be writable.
 */
enum PpStatus pp_norm(const struct PpFunction *f, enum PpNormKind kind, double p, double *value);

/*
 Operator with symbol `phi` (copied).

 # Safety
 `phi` must be a live handle; `out` must be writable.
 */
enum PpStatus pp_operator_new(enum PpOperatorKind kind,
                              const struct PpFunction *phi,
                              struct PpOperator **out_op);

/*
 # Safety
 `op` must be null or a handle not freed before.
 */
void pp_operator_free(struct PpOperator *op);

/*
 # Safety
 `op` and `f` must be live handles; `out` must be writable.
 */
enum PpStatus pp_operator_apply(const struct PpOperator *op,
                                const struct PpFunction *f,
                                struct PpFunction **out_fn);

/*
 # Safety
 `op` and `f` must be live handles; `out` must be writable.
 */
enum PpStatus pp_operator_adjoint_apply(const struct PpOperator *op,
                                        const struct PpFunction *f,
                                        struct PpFunction **out_fn);

/*
 `L^2` operator norm by power iteration. On `NoConvergence` the best
 estimate is still written to `value`. `iterations` may be null.

 # Safety
 `op` must be a live handle; `value` must be writable.
 */
enum PpStatus pp_operator_norm_2(const struct PpOperator *op,
                                 double tol,
                                 size_t max_iter,
                                 uint64_t seed,
                                 double *value,
                                 size_t *iterations);

/*
 Certified lower bound for the `L^p` operator norm, `1 < p < inf`.

 # Safety
 `op` must be a live handle; `value` must be writable.
 */
enum PpStatus pp_operator_norm_p_lower(const struct PpOperator *op,
                                       double p,
                                       size_t restarts,
                                       uint64_t seed,
                                       double *value);

/*
 Maximal `L^1` norm of `count` functions of equal shape. With
 `selfadjoint` false every value must be positive semidefinite. `gap` may
 be null; otherwise it receives the largest per-atom duality gap.

 # Safety
 `fns` must point to `count` live handles; `value` must be writable.
 */
enum PpStatus pp_max_norm_l1(const struct PpFunction *const *fns,
                             size_t count,
                             bool selfadjoint,
                             double tol,
                             double *value,
                             double *gap);

/*
 Operator norms of the `N x N` Hilbert matrix and its lower triangle.

 # Safety
 `h_norm` and `th_norm` must be writable.
 */
enum PpStatus pp_hilbert_norms(size_t dim, double *h_norm, double *th_norm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARAPROD_H */

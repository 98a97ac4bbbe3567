#ifndef ROELCKE_H
#define ROELCKE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RoelckeStatus {
  ROELCKE_STATUS_OK = 0,
  ROELCKE_STATUS_NULL_POINTER = 1,
  /**
   * Malformed input: bad lengths, labels, permutations, rationals or JSON.
   */
  ROELCKE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A mathematical precondition failed, e.g. `w_distance ≥ ε/n²`.
   */
  ROELCKE_STATUS_PRECONDITION = 3,
  /**
   * The request is too large to carry out.
   */
  ROELCKE_STATUS_INFEASIBLE = 4,
  /**
   * A value does not fit the C representation.
   */
  ROELCKE_STATUS_OVERFLOW = 5,
  ROELCKE_STATUS_INTERNAL = 6,
  ROELCKE_STATUS_PANIC = 7,
} RoelckeStatus;

/**
 * Which exact quantity [`roelcke_witness_value`] reads.
 */
typedef enum RoelckeWitnessValue {
  ROELCKE_WITNESS_VALUE_R_DEVIATION = 0,
  ROELCKE_WITNESS_VALUE_P_DEVIATION = 1,
  ROELCKE_WITNESS_VALUE_LEFTOVER_MASS = 2,
  ROELCKE_WITNESS_VALUE_EXCESS_MASS = 3,
  ROELCKE_WITNESS_VALUE_W_DISTANCE = 4,
} RoelckeWitnessValue;

/**
 * Permutation of `{0, …, N−1}`.
 */
typedef struct RoelckeAutomorphism RoelckeAutomorphism;

/**
 * Partition of `{0, …, N−1}`.
 */
typedef struct RoelckePartition RoelckePartition;

/**
 * Result of [`roelcke_factorize`].
 */
typedef struct RoelckeWitness RoelckeWitness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *roelcke_last_error(void);

/**
 * Builds a partition from `len` 1-based labels; cells are `1..=max label`.
 *
 * # Safety
 * `labels` must point to `len` readable values; `out` must be writable.
 */
enum RoelckeStatus roelcke_partition_new(const size_t *labels,
                                         size_t len,
                                         struct RoelckePartition **out);

/**
 * # Safety
 * `p` must be NULL or a handle from this library not yet freed.
 */
void roelcke_partition_free(struct RoelckePartition *p);

/**
 * Number of cells, or 0 for NULL.
 *
 * # Safety
 * `p` must be NULL or a live handle.
 */
size_t roelcke_partition_cell_count(const struct RoelckePartition *p);

/**
 * Builds a permutation from its `len` images `forward[x] = T(x)`.
 *
 * # Safety
 * `forward` must point to `len` readable values; `out` must be writable.
 */
enum RoelckeStatus roelcke_automorphism_new(const size_t *forward,
                                            size_t len,
                                            struct RoelckeAutomorphism **out);

/**
 * # Safety
 * `t` must be NULL or a handle from this library not yet freed.
 */
void roelcke_automorphism_free(struct RoelckeAutomorphism *t);

/**
 * Number of atoms, or 0 for NULL.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t roelcke_automorphism_len(const struct RoelckeAutomorphism *t);

/**
 * Copies the images into `buf`, which must hold exactly `len` entries.
 *
 * # Safety
 * `t` must be a live handle and `buf` writable for `len` values.
 */
enum RoelckeStatus roelcke_automorphism_forward(const struct RoelckeAutomorphism *t,
                                                size_t *buf,
                                                size_t len);

/**
 * `out = s ∘ t`, i.e. `x ↦ s(t(x))`.
 *
 * # Safety
 * `s`, `t` must be live handles; `out` must be writable.
 */
enum RoelckeStatus roelcke_automorphism_compose(const struct RoelckeAutomorphism *s,
                                                const struct RoelckeAutomorphism *t,
                                                struct RoelckeAutomorphism **out);

/**
 * # Safety
 * `t` must be a live handle; `out` must be writable.
 */
enum RoelckeStatus roelcke_automorphism_inverse(const struct RoelckeAutomorphism *t,
                                                struct RoelckeAutomorphism **out);

/**
 * `max_i μ(A_i △ T⁻¹A_i)` as `num/den`.
 *
 * # Safety
 * Handles must be live; `num`, `den` writable.
 */
enum RoelckeStatus roelcke_u_deviation(const struct RoelckeAutomorphism *t,
                                       const struct RoelckePartition *alpha,
                                       int64_t *num,
                                       int64_t *den);

/**
 * `max_{i,j} |μ(A_i ∩ S⁻¹A_j) − μ(A_i ∩ T⁻¹A_j)|` as `num/den`.
 *
 * # Safety
 * Handles must be live; `num`, `den` writable.
 */
enum RoelckeStatus roelcke_w_distance(const struct RoelckeAutomorphism *s,
                                      const struct RoelckeAutomorphism *t,
                                      const struct RoelckePartition *alpha,
                                      int64_t *num,
                                      int64_t *den);

/**
 * Factorizes `T = P·S·R` with `ε = eps_num/eps_den`. Returns
 * `ROELCKE_STATUS_PRECONDITION` unless `w_distance(S, T) < ε/n²`.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum RoelckeStatus roelcke_factorize(const struct RoelckeAutomorphism *s,
                                     const struct RoelckeAutomorphism *t,
                                     const struct RoelckePartition *alpha,
                                     int64_t eps_num,
                                     int64_t eps_den,
                                     struct RoelckeWitness **out);

/**
 * # Safety
 * `w` must be NULL or a handle from this library not yet freed.
 */
void roelcke_witness_free(struct RoelckeWitness *w);

/**
 * New handle holding the witness's `R`.
 *
 * # Safety
 * `w` must be live; `out` writable.
 */
enum RoelckeStatus roelcke_witness_r(const struct RoelckeWitness *w,
                                     struct RoelckeAutomorphism **out);

/**
 * New handle holding the witness's `P`.
 *
 * # Safety
 * `w` must be live; `out` writable.
 */
enum RoelckeStatus roelcke_witness_p(const struct RoelckeWitness *w,
                                     struct RoelckeAutomorphism **out);

/**
 * # Safety
 * `w` must be live; `num`, `den` writable.
 */
enum RoelckeStatus roelcke_witness_value(const struct RoelckeWitness *w,
                                         enum RoelckeWitnessValue which,
                                         int64_t *num,
                                         int64_t *den);

/**
 * Runs an experiment suite. `config_json` is a JSON object with keys
 * `suite`, `atoms`, `cells`, `epsilon` (string `"p/q"`), `trials`, `seed`,
 * `mode` and `tol`. On success `*out` receives the JSON report, to be
 * released with [`roelcke_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` writable.
 */
enum RoelckeStatus roelcke_run_suite_json(const char *config_json, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library not yet freed.
 */
void roelcke_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROELCKE_H */

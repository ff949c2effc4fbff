#ifndef RECUR_H
#define RECUR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RecurStatus {
  RECUR_STATUS_OK = 0,
  RECUR_STATUS_NULL_POINTER = 1,
  RECUR_STATUS_INVALID_ARGUMENT = 2,
  RECUR_STATUS_PARSE = 3,
  RECUR_STATUS_NOT_FOUND = 4,
  RECUR_STATUS_CAP = 5,
  RECUR_STATUS_CERTIFICATE = 6,
  RECUR_STATUS_IO = 7,
  RECUR_STATUS_PANIC = 8,
} RecurStatus;

typedef enum RecurVerdict {
  RECUR_VERDICT_NO = 0,
  RECUR_VERDICT_YES = 1,
  RECUR_VERDICT_AMBIGUOUS = 2,
} RecurVerdict;

/*
 Opaque frequency vector.
 */
typedef struct RecurFrequencies RecurFrequencies;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failing call on this thread, or null. Valid until the
 next library call on the same thread.
 */
const char *recur_last_error(void);

/*
 Library version as a static string.
 */
const char *recur_version(void);

/*
 # Safety
 `s` must be null or a string returned by this library, freed once.
 */
void recur_string_free(char *s);

/*
 `||x||`, the distance from `x` to the nearest integer.

 # Safety
 `x` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RecurStatus recur_torus_norm(const char *x, double *out_value);

/*
 `|e(x) - 1|`.

 # Safety
 `x` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RecurStatus recur_char_distance(const char *x, double *out_value);

/*
 Certified frequencies built from square roots of the first `d` primes.

 # Safety
 `handle` must be a valid pointer.
 */
enum RecurStatus recur_frequencies_sqrt_primes(size_t d, struct RecurFrequencies **handle);

/*
 Frequencies from their JSON form (as written by the CLI).

 # Safety
 `json` must be a NUL-terminated string and `handle` a valid pointer.
 */
enum RecurStatus recur_frequencies_from_json(const char *json, struct RecurFrequencies **handle);

/*
 # Safety
 `f` must be a live handle and `json` a valid pointer. Free the result with
 [`recur_string_free`].
 */
enum RecurStatus recur_frequencies_to_json(const struct RecurFrequencies *f, char **json);

/*
 Number of coordinates, or 0 for a null handle.

 # Safety
 `f` must be null or a live handle.
 */
size_t recur_frequencies_dim(const struct RecurFrequencies *f);

/*
 # Safety
 `f` must be null or a handle from this library, freed once.
 */
void recur_frequencies_free(struct RecurFrequencies *f);

/*
 Membership of `n` in the Bohr set of width `eta`.

 # Safety
 `f` must be a live handle, `eta` a NUL-terminated string, `verdict` valid.
 */
enum RecurStatus recur_bohr_contains(const struct RecurFrequencies *f,
                                     const char *eta,
                                     int64_t n,
                                     enum RecurVerdict *verdict);

/*
 Membership of `n` in the shifted Bohr-Hamming neighborhood.

 # Safety
 `f` must be a live handle, `eps` and `eta` NUL-terminated strings,
 `verdict` valid.
 */
enum RecurStatus recur_bh_contains(const struct RecurFrequencies *f,
                                   const char *eps,
                                   const char *eta,
                                   int64_t shift,
                                   int64_t n,
                                   enum RecurVerdict *verdict);

/*
 Size of a Hamming ball of radius `r` in `Z_k^d`. Fails with `Cap` when
 the count does not fit in 64 bits.

 # Safety
 `size` must be a valid pointer.
 */
enum RecurStatus recur_hamming_ball_size(uint64_t k, uint32_t d, uint32_t r, uint64_t *size);

/*
 Smallest `|n| <= bound` with `||n alpha_j - z_j|| < eps` for all `j`.
 Returns `NotFound` when there is none.

 # Safety
 `f` must be a live handle, `target` an array of `len` NUL-terminated
 strings, `eps` a NUL-terminated string and `n` valid.
 */
enum RecurStatus recur_kronecker_solve(const struct RecurFrequencies *f,
                                       const char *const *target,
                                       size_t len,
                                       const char *eps,
                                       uint64_t bound,
                                       bool nonzero,
                                       int64_t *n);

/*
 Exhaustive Kleitman check in `Z_k^d`. Sets `holds` to 1 when every subset
 of density at least `delta` has difference set meeting the radius-`r`
 Hamming ball in a nonzero element.

 # Safety
 `delta` must be a NUL-terminated string and `holds` a valid pointer.
 */
enum RecurStatus recur_kleitman_check(uint32_t k,
                                      uint32_t d,
                                      const char *delta,
                                      uint32_t r,
                                      bool *holds);

/*
 Runs the staged construction for the set described by `set_json` on
 `[lo, hi]` and returns the full report as JSON. `caps_json` may be null
 for defaults. `violations` receives the number of failed checks.

 # Safety
 String arguments must be NUL-terminated (or null for `caps_json`); out
 pointers must be valid. Free the report with [`recur_string_free`].
 */
enum RecurStatus recur_ks_build_json(const char *set_json,
                                     size_t stages,
                                     int64_t lo,
                                     int64_t hi,
                                     const char *caps_json,
                                     char **report,
                                     size_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECUR_H */

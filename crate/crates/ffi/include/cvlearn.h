#ifndef CVLEARN_H
#define CVLEARN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Branch codes written by `cv_learn_points`.
 */
#define CV_BRANCH_ZERO 0

#define CV_BRANCH_REAL_SIGN 1

#define CV_BRANCH_IMAG_SIGN 2

typedef enum CvStatus {
  CV_OK = 0,
  CV_NULL_POINTER = 1,
  CV_INVALID_ARGUMENT = 2,
  CV_UNSUPPORTED = 3,
  CV_NUMERICAL = 4,
  CV_PARSE = 5,
  CV_IO = 6,
  CV_PANIC = 7,
} CvStatus;

/**
 * Opaque state handle.
 */
typedef struct CvState CvState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL.
 */
const char *cv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cv_version(void);

/**
 * Builds a state from a TOML state description (the `[state]` table of a config).
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CvStatus cv_state_from_toml(const char *spec, struct CvState **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvStatus cv_state_vacuum(size_t modes, struct CvState **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvStatus cv_state_fock(size_t n, struct CvState **out);

/**
 * Cat state N(|β⟩ + parity·|−β⟩).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvStatus cv_state_cat(double beta_re, double beta_im, int8_t parity, struct CvState **out);

/**
 * # Safety
 * `state` must come from a `cv_state_*` constructor and not be used afterwards. NULL is ignored.
 */
void cv_state_free(struct CvState *state);

/**
 * # Safety
 * `state` must be a live handle or NULL (returns 0).
 */
size_t cv_state_modes(const struct CvState *state);

/**
 * Analytic C(α); `alpha` holds 2k doubles (re₁, im₁, …).
 *
 * # Safety
 * Pointers must be valid; `alpha` must hold 2·modes doubles.
 */
enum CvStatus cv_characteristic(const struct CvState *state,
                                const double *alpha,
                                double *out_re,
                                double *out_im);

/**
 * Pair rounds ⌈(8/ε²) ln(4M/δ)⌉ for product or square estimates.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvStatus cv_plan_pairs(double epsilon, double delta, size_t m_points, uint64_t *out);

/**
 * Learning plan: square-stage pairs N₁, copies per sign bank N₂ and the
 * quantum-accounted total.
 *
 * # Safety
 * Output pointers must be valid.
 */
enum CvStatus cv_plan_learn(double epsilon,
                            double delta,
                            size_t m_points,
                            uint64_t *out_n1,
                            uint64_t *out_n2,
                            uint64_t *out_quantum);

/**
 * Square estimates C(α)² at `n_points` points using the state's declared
 * reflection symmetry. `out` receives 2·n_points doubles (re, im).
 *
 * # Safety
 * `points` holds 2·modes·n_points doubles; `backend` is NULL or a tag string.
 */
enum CvStatus cv_estimate_square(const struct CvState *state,
                                 const double *points,
                                 size_t n_points,
                                 uint64_t n_pairs,
                                 const char *backend,
                                 uint64_t seed,
                                 double *out);

/**
 * Learns C(α) at `n_points` points to accuracy ε with failure probability δ.
 * `out` receives 2·n_points doubles; `out_branch` (nullable) one
 * `CV_BRANCH_*` code per point; `out_copies` (nullable) the
 * quantum-accounted copy count. Uses the same seed scheme as the CLI.
 *
 * # Safety
 * `points` holds 2·modes·n_points doubles; output buffers must be large enough.
 */
enum CvStatus cv_learn_points(const struct CvState *state,
                              const double *points,
                              size_t n_points,
                              double epsilon,
                              double delta,
                              const char *backend,
                              uint64_t seed,
                              double *out,
                              uint8_t *out_branch,
                              uint64_t *out_copies);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVLEARN_H */

#ifndef BELLFIELD_H
#define BELLFIELD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BfStatus {
  BF_STATUS_OK = 0,
  BF_STATUS_INVALID_ARGUMENT = 1,
  BF_STATUS_DEGENERATE = 2,
  BF_STATUS_NULL_POINTER = 3,
  BF_STATUS_PANIC = 4,
} BfStatus;

/**
 * Opaque sampled field ensemble.
 */
typedef struct BfEnsemble BfEnsemble;

/**
 * Four analyzer angles in radians: `a, a′, b, b′`.
 */
typedef struct BfSettings {
  double a;
  double a_prime;
  double b;
  double b_prime;
} BfSettings;

/**
 * One Bell evaluation. Correlations are ordered
 * `C(a,b), C(a′,b), C(a,b′), C(a′,b′)`.
 */
typedef struct BfBellResult {
  struct BfSettings settings;
  double correlations[4];
  double correlation_stderrs[4];
  double b_value;
  double b_stderr;
} BfBellResult;

/**
 * Interferometer imperfections and the detector-noise seed.
 */
typedef struct BfSetup {
  double detector_noise;
  double phase_error;
  uint64_t noise_seed;
} BfSetup;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread. Valid until the next failing
 * call on the same thread; empty if none.
 */
const char *bf_last_error(void);

/**
 * Schmidt coefficients of a beam with the given degree of polarization.
 */
enum BfStatus bf_schmidt_from_dop(double dop, double *kappa1, double *kappa2);

/**
 * Degree of polarization of a Stokes vector.
 */
enum BfStatus bf_dop_from_stokes(double s0, double s1, double s2, double s3, double *dop);

/**
 * Closed-form `C(a, b)` for a beam with leading Schmidt coefficient `kappa1`.
 */
enum BfStatus bf_correlation_analytic(double a, double b, double kappa1, double *value);

/**
 * Maximum of ℬ over all settings.
 */
enum BfStatus bf_maximize_bell(double kappa1, struct BfBellResult *result);

/**
 * Closed-form optimal settings. Degenerate for a separable beam.
 */
enum BfStatus bf_gisin_settings(double kappa1, struct BfSettings *settings);

/**
 * Stripping polarizer angle for function-basis rotation `b`.
 */
enum BfStatus bf_stripping_angle(double b, double kappa1, double *angle);

/**
 * `P₁₁, P₁₂, P₂₁, P₂₂` reconstructed by the interferometer on an exact beam.
 * `quad` must hold four doubles.
 */
enum BfStatus bf_protocol_quad(double kappa1,
                               double a,
                               double b,
                               struct BfSetup setup,
                               double *quad);

/**
 * Sample a field ensemble. Release with [`bf_ensemble_free`].
 */
enum BfStatus bf_ensemble_new(double kappa1,
                              double intensity,
                              size_t n_realizations,
                              size_t samples_per_realization,
                              uint64_t seed,
                              struct BfEnsemble **ensemble);

/**
 * Release an ensemble. Null is ignored.
 *
 * # Safety
 *
 * `ensemble` must be null or a handle from [`bf_ensemble_new`] that has not
 * been freed yet.
 */
void bf_ensemble_free(struct BfEnsemble *ensemble);

/**
 * Number of field samples held.
 */
enum BfStatus bf_ensemble_len(const struct BfEnsemble *ensemble, size_t *len);

/**
 * Empirical Stokes vector `S₀..S₃`. `stokes` must hold four doubles.
 */
enum BfStatus bf_ensemble_stokes(const struct BfEnsemble *ensemble, double *stokes);

/**
 * `C(a, b)` measured through the interferometer on the sampled field, with
 * the stripping polarizer set for `strip_kappa1`.
 */
enum BfStatus bf_ensemble_correlation(const struct BfEnsemble *ensemble,
                                      double a,
                                      double b,
                                      double strip_kappa1,
                                      struct BfSetup setup,
                                      double *value,
                                      double *value_stderr);

/**
 * ℬ measured through the interferometer on the sampled field.
 */
enum BfStatus bf_ensemble_bell(const struct BfEnsemble *ensemble,
                               struct BfSettings settings,
                               double strip_kappa1,
                               struct BfSetup setup,
                               struct BfBellResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLFIELD_H */

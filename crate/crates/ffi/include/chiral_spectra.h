#ifndef CHIRAL_SPECTRA_H
#define CHIRAL_SPECTRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ChiralStatus {
  CHIRAL_STATUS_OK = 0,
  CHIRAL_STATUS_NULL_POINTER = 1,
  CHIRAL_STATUS_INVALID_PARAMETER = 2,
  CHIRAL_STATUS_NUMERICAL = 3,
  CHIRAL_STATUS_OUT_OF_RANGE = 4,
  CHIRAL_STATUS_PANIC = 5,
} ChiralStatus;

typedef enum ChiralEngine {
  CHIRAL_ENGINE_LINEAR = 0,
  CHIRAL_ENGINE_FULL = 1,
} ChiralEngine;

typedef enum ChiralHandedness {
  CHIRAL_HANDEDNESS_LEFT = 0,
  CHIRAL_HANDEDNESS_RIGHT = 1,
} ChiralHandedness;

/**
 * Opaque simulation handle.
 */
typedef struct ChiralSimulator ChiralSimulator;

/**
 * Relaxation rates in units of γ.
 */
typedef struct ChiralMolecule {
  double gamma31_pop;
  double gamma21_pop;
  double gamma32_pop;
  double gamma12;
  double gamma13;
  double gamma23;
} ChiralMolecule;

/**
 * Entry amplitudes and loop phase. Probes must be equal and `theta` zero.
 */
typedef struct ChiralDrive {
  double omega21;
  double omega31;
  double omega32;
  double theta;
} ChiralDrive;

typedef struct ChiralMedium {
  double p_plus;
  double zeta;
  double dipole_ratio;
} ChiralMedium;

typedef struct ChiralPeaks {
  double delta_plus;
  double delta_minus;
  double h_plus;
  double h_minus;
  double h_tilde_plus;
  double h_tilde_minus;
  double dp_prime;
} ChiralPeaks;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fill `out` with closed-system rates for the given population decay rates.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `ChiralMolecule`.
 */
enum ChiralStatus chiral_molecule_closed(double gamma31_pop,
                                         double gamma21_pop,
                                         double gamma32_pop,
                                         struct ChiralMolecule *out);

/**
 * Create a simulator. On success `*out` owns a handle that must be released
 * with `chiral_simulator_free`.
 *
 * # Safety
 * `mol`, `drive` and `medium` must be null or valid for reads; `out` must be
 * null or valid for one pointer write.
 */
enum ChiralStatus chiral_simulator_new(const struct ChiralMolecule *mol,
                                       const struct ChiralDrive *drive,
                                       const struct ChiralMedium *medium,
                                       enum ChiralEngine engine,
                                       struct ChiralSimulator **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from `chiral_simulator_new` not yet freed.
 */
void chiral_simulator_free(struct ChiralSimulator *sim);

/**
 * Replace the medium. Drops any cached calibration.
 *
 * # Safety
 * `sim` must be a live handle; `medium` must be null or valid for reads.
 */
enum ChiralStatus chiral_simulator_set_medium(struct ChiralSimulator *sim,
                                              const struct ChiralMedium *medium);

/**
 * Steady-state density matrix of one enantiomer at detuning `delta`, written
 * row-major into `re[9]` and `im[9]`.
 *
 * # Safety
 * `sim` must be a live handle; `re` and `im` must each hold 9 doubles.
 */
enum ChiralStatus chiral_steady_state(const struct ChiralSimulator *sim,
                                      double delta,
                                      enum ChiralHandedness hand,
                                      double *re,
                                      double *im);

/**
 * Characteristic peaks of the configured medium.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be null or valid for one write.
 */
enum ChiralStatus chiral_peaks(const struct ChiralSimulator *sim, struct ChiralPeaks *out);

/**
 * Probe transmission at each of `n` sorted detunings.
 *
 * # Safety
 * `sim` must be a live handle; `deltas` and `transmission` must each hold
 * `n` doubles.
 */
enum ChiralStatus chiral_sweep(const struct ChiralSimulator *sim,
                               const double *deltas,
                               uintptr_t n,
                               double *transmission);

/**
 * Forward model: `δp′` for enantiomeric difference `dp` at the handle's depth.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be null or valid for one write.
 */
enum ChiralStatus chiral_forward(const struct ChiralSimulator *sim, double dp, double *out);

/**
 * Recover `δp` from a measured `δp′`. The calibration curve is built on
 * first use and cached in the handle.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be null or valid for one write.
 */
enum ChiralStatus chiral_invert(struct ChiralSimulator *sim, double dp_prime, double *out);

/**
 * Message for the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *chiral_last_error(void);

/**
 * Static description of a status code.
 */
const char *chiral_status_str(enum ChiralStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIRAL_SPECTRA_H */

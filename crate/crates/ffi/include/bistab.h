#ifndef BISTAB_H
#define BISTAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum BistabStatus {
  BISTAB_STATUS_OK = 0,
  BISTAB_STATUS_NULL_POINTER = 1,
  BISTAB_STATUS_INVALID_ARGUMENT = 2,
  BISTAB_STATUS_UNKNOWN_PRESET = 3,
  BISTAB_STATUS_NUMERICAL = 4,
  BISTAB_STATUS_BUFFER_TOO_SMALL = 5,
  BISTAB_STATUS_PANIC = 6,
} BistabStatus;

// Hamiltonian selector for [`bistab_steady_observables`].
typedef enum BistabModel {
  BISTAB_MODEL_JC = 0,
  BISTAB_MODEL_GJC = 1,
  BISTAB_MODEL_DUFFING = 2,
} BistabModel;

// Opaque parameter set.
typedef struct BistabParams BistabParams;

// Steady-state expectation values. `abs_sigma_minus` is NaN for the
// cavity-only model.
typedef struct BistabObservables {
  double re_a;
  double im_a;
  double n_photon;
  double sigma_z;
  double abs_sigma_minus;
} BistabObservables;

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t bistab_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *bistab_version(void);

// Creates a handle from a named preset (`D1`, `D2`, `FIG2`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be valid for a write.
enum BistabStatus bistab_params_preset(const char *name, struct BistabParams **out);

// Creates a handle from explicit values: frequencies and rates in GHz,
// temperature in kelvin. The drive starts off, parked on the cavity.
//
// # Safety
// `out` must be valid for a write.
enum BistabStatus bistab_params_new(double f_c,
                                    double f_q,
                                    double g,
                                    double chi,
                                    double kappa,
                                    double gamma,
                                    double gamma_phi,
                                    double temperature,
                                    struct BistabParams **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `p` must be null or a handle not yet freed.
void bistab_params_free(struct BistabParams *p);

// Sets the drive frequency (GHz) and strength as `ε_d / (2κ)`.
//
// # Safety
// `p` must be a live handle.
enum BistabStatus bistab_params_set_drive(struct BistabParams *p, double f_d, double scale);

// `δ² / (4g²)`.
//
// # Safety
// `p` must be a live handle; `out` valid for a write.
enum BistabStatus bistab_critical_photon_number(const struct BistabParams *p, double *out);

// Mean-field steady states, ordered by photon number. Writes up to
// `capacity` photon numbers and stability flags (1 stable, 0 unstable) and
// the number of roots to `count`. Returns `BufferTooSmall` when `capacity`
// is short; `count` is still set.
//
// # Safety
// `photons` and `stable` must be valid for `capacity` elements; `count`
// valid for a write.
enum BistabStatus bistab_meanfield_roots(const struct BistabParams *p,
                                         double *photons,
                                         int32_t *stable,
                                         size_t capacity,
                                         size_t *count);

// Master-equation steady state at a fixed Fock cutoff. `levels` is the
// transmon level count for `Gjc` and ignored otherwise.
//
// # Safety
// `p` must be a live handle; `out` valid for a write.
enum BistabStatus bistab_steady_observables(const struct BistabParams *p,
                                            enum BistabModel model,
                                            size_t levels,
                                            size_t cutoff,
                                            struct BistabObservables *out);

// Analytic steady-state `⟨a⟩` of the effective Fokker-Planck model.
//
// # Safety
// `p` must be a live handle; `re` and `im` valid for writes.
enum BistabStatus bistab_fpe_first_moment(const struct BistabParams *p, double *re, double *im);

// `₀F₂(; a, b; z)` for complex arguments.
//
// # Safety
// `re` and `im` must be valid for writes.
enum BistabStatus bistab_hyp0f2(double a_re,
                                double a_im,
                                double b_re,
                                double b_im,
                                double z_re,
                                double z_im,
                                double *re,
                                double *im);

#endif  /* BISTAB_H */

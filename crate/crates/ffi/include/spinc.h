#ifndef SPINC_H
#define SPINC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpincOperatorKind {
  /**
   * Dirac operator, with the mass term when `wilson_strength > 0`.
   */
  SPINC_OPERATOR_KIND_DIRAC = 0,
  /**
   * `Δ_k - kτ`.
   */
  SPINC_OPERATOR_KIND_SCHRODINGER = 1,
  /**
   * Covariant Laplacian.
   */
  SPINC_OPERATOR_KIND_LAPLACIAN = 2,
  /**
   * Lichnerowicz right-hand side matching `Dirac` with the same mass term.
   */
  SPINC_OPERATOR_KIND_LICHNEROWICZ_RHS = 3,
} SpincOperatorKind;

typedef enum SpincStatus {
  SPINC_STATUS_OK = 0,
  SPINC_STATUS_NULL_POINTER = 1,
  SPINC_STATUS_INVALID_ARGUMENT = 2,
  SPINC_STATUS_CONFIG = 3,
  SPINC_STATUS_NUMERICAL = 4,
  SPINC_STATUS_INDETERMINATE = 5,
  SPINC_STATUS_IO = 6,
  SPINC_STATUS_PANIC = 7,
} SpincStatus;

/**
 * Model manifold together with the bundle data.
 */
typedef struct SpincModel SpincModel;

typedef struct SpincOperator SpincOperator;

typedef struct SpincSpectrum SpincSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t spinc_last_error(char *buf, size_t len);

/**
 * Flat torus with `2n` sides, `n` symplectic coefficients and `n` Chern
 * numbers for `L` and for the twisted summand of `E`.
 *
 * # Safety
 * Array arguments must point to the stated number of elements; `out` must be writable.
 */
enum SpincStatus spinc_torus_model_new(size_t n,
                                       const double *sides,
                                       size_t resolution,
                                       const double *a,
                                       const int64_t *chern,
                                       size_t rank_e,
                                       const int64_t *chern_e,
                                       struct SpincModel **out);

/**
 * Round sphere of radius `radius` with `∫ω = flux`, `L` of degree `flux`
 * and `E` of rank `rank_e` whose first summand has degree `chern_e`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SpincStatus spinc_sphere_model_new(double radius,
                                        double flux,
                                        size_t rank_e,
                                        int64_t chern_e,
                                        struct SpincModel **out);

/**
 * # Safety
 * `model` must be null or a handle from a `spinc_*_model_new` call, freed once.
 */
void spinc_model_free(struct SpincModel *model);

/**
 * The spectral-gap constant `λ` of the model.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SpincStatus spinc_model_lambda(const struct SpincModel *model, double *out);

/**
 * Closed-form index of `D_k^+`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SpincStatus spinc_index_prediction(const struct SpincModel *model, uint32_t k, int64_t *out);

/**
 * Assemble an operator on `L^k ⊗ E` over a lattice model. `wilson_strength = 0`
 * selects the bare Dirac operator.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SpincStatus spinc_operator_new(const struct SpincModel *model,
                                    enum SpincOperatorKind kind,
                                    uint32_t k,
                                    double wilson_strength,
                                    uint32_t wilson_power,
                                    struct SpincOperator **out);

/**
 * # Safety
 * `op` must be null or a handle from `spinc_operator_new`, freed once.
 */
void spinc_operator_free(struct SpincOperator *op);

/**
 * Complex dimension of the operator, 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t spinc_operator_dim(const struct SpincOperator *op);

/**
 * `y = A x` on interleaved complex vectors of `2 * dim` doubles.
 *
 * # Safety
 * `x` and `y` must each hold `2 * len` doubles and must not overlap.
 */
enum SpincStatus spinc_operator_apply(const struct SpincOperator *op,
                                      const double *x,
                                      double *y,
                                      size_t len);

/**
 * The `count` smallest eigenvalues of the operator, or of its square when
 * `square` is nonzero.
 *
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum SpincStatus spinc_lowest_eigenvalues(const struct SpincOperator *op,
                                          size_t count,
                                          int32_t square,
                                          double tolerance,
                                          uint64_t seed,
                                          struct SpincSpectrum **out);

/**
 * Number of eigenvalues held, 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t spinc_spectrum_len(const struct SpincSpectrum *spectrum);

/**
 * Copy up to `len` eigenvalues (ascending) and, if `residuals` is not null,
 * their residuals. Returns the number copied.
 *
 * # Safety
 * `values` (and `residuals` when not null) must hold `len` writable doubles.
 */
size_t spinc_spectrum_values(const struct SpincSpectrum *spectrum,
                             double *values,
                             double *residuals,
                             size_t len);

/**
 * # Safety
 * `spectrum` must be null or a handle from `spinc_lowest_eigenvalues`, freed once.
 */
void spinc_spectrum_free(struct SpincSpectrum *spectrum);

/**
 * Run a configuration given as text, writing the report into `out_dir`
 * (the config's own `output` when null). `exit_code` receives the CLI exit
 * code: 0 pass, 1 fail, 3 indeterminate.
 *
 * # Safety
 * `config` must be a NUL-terminated string, `out_dir` null or one, `exit_code` writable.
 */
enum SpincStatus spinc_run_config(const char *config, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINC_H */

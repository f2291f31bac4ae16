#ifndef HEISLAB_H
#define HEISLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_INVALID_ARGUMENT = 2,
  HL_STATUS_DOMAIN = 3,
  HL_STATUS_UNSUPPORTED = 4,
  HL_STATUS_NUMERICAL = 5,
  HL_STATUS_CONFIG = 6,
  HL_STATUS_IO = 7,
  HL_STATUS_UTF8 = 8,
  HL_STATUS_PANIC = 9,
} HlStatus;

/**
 * Experiment configuration, created with defaults by [`hl_config_new`].
 */
typedef struct HlConfig HlConfig;

/**
 * Three Gaussian polynomials on `ℝ^(2d+1)`.
 */
typedef struct HlTriple HlTriple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty after a success. Valid until the
 * next call on the same thread.
 */
const char *hl_last_error(void);

/**
 * # Safety
 * `out` must be writable.
 */
enum HlStatus hl_config_new(struct HlConfig **out);

/**
 * Sets one key with the same names and syntax as the command-line flags, e.g.
 * `("grid", "1,2,5")` or `("gh-nodes", "40")`.
 *
 * # Safety
 * `cfg` must come from [`hl_config_new`]; `key` and `value` must be NUL-terminated.
 */
enum HlStatus hl_config_set(struct HlConfig *cfg, const char *key, const char *value);

/**
 * # Safety
 * `cfg` must come from [`hl_config_new`] or be null.
 */
void hl_config_free(struct HlConfig *cfg);

/**
 * `A_p^n`.
 *
 * # Safety
 * `p` must point to 3 doubles and `out` must be writable.
 */
enum HlStatus hl_optimal_constant(const double *p, size_t n, double *out);

/**
 * The maximizers `g_j = e^{−γ_j|z|²}` on `ℝ^(2d+1)`.
 *
 * # Safety
 * `p` must point to 3 doubles and `out` must be writable.
 */
enum HlStatus hl_triple_gaussians(const double *p, size_t d, struct HlTriple **out);

/**
 * `g_j + eps·mode_j(α)`.
 *
 * # Safety
 * `p` must point to 3 doubles, `alpha` to `alpha_len` integers, and `out` must be writable.
 */
enum HlStatus hl_triple_perturbed(const double *p,
                                  size_t d,
                                  double eps,
                                  const uint32_t *alpha,
                                  size_t alpha_len,
                                  struct HlTriple **out);

/**
 * The `d = 1` family `e^{−γ_j(λ|x|²+λ⁻¹t²+iλ⁻¹t)}`.
 *
 * # Safety
 * `p` must point to 3 doubles and `out` must be writable.
 */
enum HlStatus hl_triple_lambda(const double *p, double lambda, struct HlTriple **out);

/**
 * Point value of `f_j` at `z ∈ ℝ^(2d+1)`.
 *
 * # Safety
 * `z` must point to `len` doubles; `re` and `im` must be writable.
 */
enum HlStatus hl_triple_eval(const struct HlTriple *f,
                             size_t j,
                             const double *z,
                             size_t len,
                             double *re,
                             double *im);

/**
 * # Safety
 * `f` must come from one of the `hl_triple_*` constructors or be null.
 */
void hl_triple_free(struct HlTriple *f);

/**
 * `Φ(f, A, b)` with Gauss–Hermite quadrature where no closed form applies. `a` holds the
 * `2d×2d` matrix row-major.
 *
 * # Safety
 * `p` must point to 3 doubles, `a` to `a_len` doubles; `value` and `error` must be writable.
 */
enum HlStatus hl_phi(const struct HlTriple *f,
                     const double *p,
                     const double *a,
                     size_t a_len,
                     double b,
                     size_t gh_nodes,
                     double *value,
                     double *error);

/**
 * `δ = 1 − Φ / A_p^(2d+1)`, same arguments as [`hl_phi`].
 *
 * # Safety
 * As for [`hl_phi`].
 */
enum HlStatus hl_deficit(const struct HlTriple *f,
                         const double *p,
                         const double *a,
                         size_t a_len,
                         double b,
                         size_t gh_nodes,
                         double *deficit,
                         double *error);

/**
 * Runs one of `verify`, `lambda`, `exponent-fit`, `deficit`, `distance` and returns its JSON
 * report in `json` (free with [`hl_string_free`]) and its failure count in `failures`.
 *
 * # Safety
 * `cfg` must come from [`hl_config_new`]; `command` must be NUL-terminated; `json` and
 * `failures` must be writable.
 */
enum HlStatus hl_run(const struct HlConfig *cfg,
                     const char *command,
                     char **json,
                     size_t *failures);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void hl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEISLAB_H */

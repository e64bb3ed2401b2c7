#ifndef RDBP_H
#define RDBP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdbpClassification {
  RdbpClassification_Strict = 0,
  RdbpClassification_Critical = 1,
  RdbpClassification_Inadmissible = 2,
} RdbpClassification;

typedef enum RdbpStatus {
  RdbpStatus_Ok = 0,
  RdbpStatus_NullPointer = 1,
  RdbpStatus_InvalidArgument = 2,
  RdbpStatus_InvalidUtf8 = 3,
  RdbpStatus_OutOfRange = 4,
  RdbpStatus_Panic = 5,
} RdbpStatus;

/**
 * Opaque claim law.
 */
typedef struct RdbpClaim RdbpClaim;

/**
 * Opaque list of equilibria, sorted by `τ`.
 */
typedef struct RdbpSolutions RdbpSolutions;

/**
 * One equilibrium. `alpha_any` is true when every `α > 0` solves the
 * balance; `alpha` is NaN then.
 */
typedef struct RdbpSolution {
  double tau;
  double alpha;
  bool alpha_any;
  double effective_mean;
  enum RdbpClassification classification;
  double equation_residual;
  double constraint_residual;
} RdbpSolution;

typedef struct RdbpBrsBound {
  /**
   * `+inf` when the whole mean fits in the budget and the law is unbounded.
   */
  double tau_star;
  double bound;
} RdbpBrsBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *rdbp_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rdbp_string_free(char *s);

/**
 * Parses a claim law from its JSON record, e.g.
 * `{"family": "exponential", "rate": 1.0}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RdbpStatus rdbp_claim_from_json(const char *json, struct RdbpClaim **out);

/**
 * # Safety
 * `claim` must come from [`rdbp_claim_from_json`] and not have been freed.
 */
void rdbp_claim_free(struct RdbpClaim *claim);

/**
 * # Safety
 * `claim` must be a live handle; `out` must be writable.
 */
enum RdbpStatus rdbp_claim_cdf(const struct RdbpClaim *claim, double x, double *out);

/**
 * `∫₀^τ x dF(x)`.
 *
 * # Safety
 * `claim` must be a live handle; `out` must be writable.
 */
enum RdbpStatus rdbp_claim_partial_mean(const struct RdbpClaim *claim, double tau, double *out);

/**
 * # Safety
 * `claim` must be a live handle; `out` must be writable.
 */
enum RdbpStatus rdbp_claim_quantile(const struct RdbpClaim *claim, double u, double *out);

/**
 * Solves a two-population experiment config (JSON text).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum RdbpStatus rdbp_equilibrium_solve(const char *config_json, struct RdbpSolutions **out);

/**
 * # Safety
 * `solutions` must be a live handle.
 */
uintptr_t rdbp_solutions_len(const struct RdbpSolutions *solutions);

/**
 * # Safety
 * `solutions` must be a live handle; `out` must be writable.
 */
enum RdbpStatus rdbp_solutions_get(const struct RdbpSolutions *solutions,
                                   uintptr_t index,
                                   struct RdbpSolution *out);

/**
 * # Safety
 * `solutions` must come from [`rdbp_equilibrium_solve`] and not have been freed.
 */
void rdbp_solutions_free(struct RdbpSolutions *solutions);

/**
 * # Safety
 * `claim` must be a live handle; `out` must be writable.
 */
enum RdbpStatus rdbp_brs_bound(const struct RdbpClaim *claim,
                               uint64_t n,
                               double budget,
                               struct RdbpBrsBound *out);

/**
 * Runs the experiment config and returns the summary as JSON text.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 * Release the result with [`rdbp_string_free`].
 */
enum RdbpStatus rdbp_simulate_summary_json(const char *config_json, char **out);

/**
 * `∫ |Q_src − Q_dst|^p du`.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum RdbpStatus rdbp_quantile_coupling_cost(const struct RdbpClaim *src,
                                            const struct RdbpClaim *dst,
                                            double p,
                                            uintptr_t quad_points,
                                            double *out);

/**
 * Northwest-corner plan for balanced marginals `a` (length `m`) and `b`
 * (length `n`); `flows` receives `m * n` row-major entries.
 *
 * # Safety
 * `a`, `b` must point to `m`, `n` readable doubles and `flows` to `m * n`
 * writable doubles.
 */
enum RdbpStatus rdbp_northwest_plan(const double *a,
                                    uintptr_t m,
                                    const double *b,
                                    uintptr_t n,
                                    double *flows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDBP_H */

#ifndef SHADOWLAB_H
#define SHADOWLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by the C API.
 */
typedef enum SlStatus {
  SlOk = 0,
  SlNullPointer = 1,
  SlInvalidUtf8 = 2,
  SlJson = 3,
  SlDomain = 4,
  SlParam = 5,
  SlWindow = 6,
  SlGrid = 7,
  SlNotFound = 8,
  SlInternal = 9,
} SlStatus;

/**
 * Opaque chain handle.
 */
typedef struct SlChain SlChain;

/**
 * Opaque flow handle.
 */
typedef struct SlFlow SlFlow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version string; static storage, do not free.
 */
const char *sl_version(void);

/**
 * Message of the last error on this thread; valid until the next API call
 * on the same thread. Do not free.
 */
const char *sl_last_error(void);

/**
 * Free a string returned by this API.
 *
 * # Safety
 * `s` must be a pointer returned by an sl_* function that documents caller
 * ownership, not yet freed.
 */
void sl_string_free(char *s);

/**
 * Parse a flow descriptor from JSON. Returns null on error (see
 * sl_last_error); free with sl_flow_free.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string.
 */
struct SlFlow *sl_flow_from_json(const char *json);

/**
 * Serialize a flow to JSON; caller frees with sl_string_free.
 *
 * # Safety
 * `flow` must be a live handle from sl_flow_from_json.
 */
char *sl_flow_to_json(const struct SlFlow *flow);

/**
 * # Safety
 * `flow` must be a handle from sl_flow_from_json, not yet freed.
 */
void sl_flow_free(struct SlFlow *flow);

/**
 * Dimension of the flow's space; 0 on null input.
 *
 * # Safety
 * `flow` must be a live handle or null.
 */
uintptr_t sl_flow_dim(const struct SlFlow *flow);

/**
 * Evaluate the flow at time t from x into out (dim doubles).
 *
 * # Safety
 * `x` and `out` must point to `dim` readable/writable doubles; `flow` must
 * be a live handle.
 */
enum SlStatus sl_flow_evaluate(const struct SlFlow *flow,
                               double t,
                               const double *x,
                               uintptr_t dim,
                               double *out);

/**
 * Metric distance between two coordinate vectors.
 *
 * # Safety
 * `a`, `b` must point to `dim` readable doubles and `out` to one writable
 * double; `flow` must be a live handle.
 */
enum SlStatus sl_flow_distance(const struct SlFlow *flow,
                               const double *a,
                               const double *b,
                               uintptr_t dim,
                               double *out);

/**
 * Parse a chain from JSON; free with sl_chain_free.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string.
 */
struct SlChain *sl_chain_from_json(const char *json);

/**
 * Serialize a chain to JSON; caller frees with sl_string_free.
 *
 * # Safety
 * `chain` must be a live handle.
 */
char *sl_chain_to_json(const struct SlChain *chain);

/**
 * # Safety
 * `chain` must be a handle from this API, not yet freed.
 */
void sl_chain_free(struct SlChain *chain);

/**
 * Generate a uniform-noise chain from x0 over anchor window
 * [n_min, n_max]. Returns null on error; free with sl_chain_free.
 *
 * # Safety
 * `flow` must be a live handle and `x0` point to `dim` readable doubles.
 */
struct SlChain *sl_generate_chain(const struct SlFlow *flow,
                                  const double *x0,
                                  uintptr_t dim,
                                  double d,
                                  double t0,
                                  int64_t n_min,
                                  int64_t n_max,
                                  uint64_t seed);

/**
 * Continuous-form defect of a chain; writes one double.
 *
 * # Safety
 * `flow`, `chain` must be live handles and `out` writable.
 */
enum SlStatus sl_chain_defect(const struct SlFlow *flow, const struct SlChain *chain, double *out);

/**
 * Evaluate the chain at a time inside its window.
 *
 * # Safety
 * `out` must point to `dim` writable doubles; handles must be live.
 */
enum SlStatus sl_chain_eval(const struct SlFlow *flow,
                            const struct SlChain *chain,
                            double t,
                            double *out);

/**
 * Oriented shadowing search with the default grid; returns the certificate
 * as JSON (caller frees) or null with *status set (SlNotFound when the
 * search ran but found nothing).
 *
 * # Safety
 * Handles must be live; `status` must be writable.
 */
char *sl_search_oriented(const struct SlFlow *flow,
                         const struct SlChain *chain,
                         double eps,
                         uintptr_t per_ball,
                         enum SlStatus *status);

/**
 * Slope-constrained search; see sl_search_oriented.
 *
 * # Safety
 * Handles must be live; `status` must be writable.
 */
char *sl_search_standard(const struct SlFlow *flow,
                         const struct SlChain *chain,
                         double eps,
                         double eps_rep,
                         uintptr_t per_ball,
                         enum SlStatus *status);

/**
 * Recompute a JSON certificate's grid sup against the chain; writes it to
 * `out_sup`.
 *
 * # Safety
 * Handles must be live, `cert_json` a valid string, `out_sup` writable.
 */
enum SlStatus sl_verify_certificate(const struct SlFlow *flow,
                                    const struct SlChain *chain,
                                    const char *cert_json,
                                    double *out_sup);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SHADOWLAB_H */

#ifndef RATION_LAB_H
#define RATION_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_UTF8 = 2,
  RL_STATUS_INVALID_ARGUMENT = 3,
  RL_STATUS_INVALID_INSTANCE = 4,
  RL_STATUS_ALLOCATION_EXCEEDS_DEMAND = 5,
  RL_STATUS_BUDGET_EXCEEDED = 6,
  RL_STATUS_NUMERIC = 7,
  RL_STATUS_IO = 8,
  RL_STATUS_PANIC = 9,
} RlStatus;

// Opaque instance handle.
typedef struct RlInstance RlInstance;

// Opaque policy handle.
typedef struct RlPolicy RlPolicy;

typedef struct RlGuarantees {
  double mu;
  uint64_t n;
  double kappa_p;
  double kappa_a;
  double kappa_fa;
  double kappa_tfr;
  double w_bar;
} RlGuarantees;

typedef struct RlReport {
  double mu;
  double ex_post;
  double ex_ante;
  double ex_post_fairness;
  double ex_ante_fairness;
  double waste;
  double offline_ex_post;
  double half_width_95;
  uint64_t paths_used;
  // Whether the report came from full enumeration.
  bool exact;
} RlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread (empty after a
// success). Valid until the next call into this library on the same thread.
const char *rl_last_error_message(void);

double rl_kappa_p(double mu, uintptr_t n);

double rl_kappa_a(double mu, uintptr_t n);

double rl_kappa_tfr(double mu);

// # Safety
// `out` must be null or point to writable memory for one `RlGuarantees`.
enum RlStatus rl_guarantees(double mu, uintptr_t n, struct RlGuarantees *out);

// # Safety
// `out` must be null or point to a writable `double`.
enum RlStatus rl_fill_rate(double allocation, double demand, double *out);

double rl_ppa_decide(double demand, double supply, double mu_next);

double rl_tfr_decide(double tau, double demand, double supply);

// Parses an instance from JSON text. Relative bank paths resolve against
// `base_dir`, or the working directory when it is null.
//
// # Safety
// `json` and `base_dir` (if non-null) must be NUL-terminated strings; `out`
// must point to writable storage for one handle pointer.
enum RlStatus rl_instance_from_json(const char *json,
                                    const char *base_dir,
                                    struct RlInstance **out);

// Hard instance at `(n, mu)` for the regime `mu` falls in, unit supply.
//
// # Safety
// `out` must point to writable storage for one handle pointer.
enum RlStatus rl_instance_hard(uintptr_t n, double mu, struct RlInstance **out);

// Supply scarcity, or NaN for a null handle.
//
// # Safety
// `instance` must be null or a live handle.
double rl_instance_mu(const struct RlInstance *instance);

// Number of agents, or 0 for a null handle.
//
// # Safety
// `instance` must be null or a live handle.
uintptr_t rl_instance_agents(const struct RlInstance *instance);

// # Safety
// `instance` must be null or a handle not yet freed.
void rl_instance_free(struct RlInstance *instance);

// Builds a policy from its string form ("ppa", "tfr:0.5", "opt-tfr",
// "offline", "dp:0.01", ...) against an instance.
//
// # Safety
// `spec` must be a NUL-terminated string, `instance` a live handle and
// `out` writable storage for one handle pointer.
enum RlStatus rl_policy_build(const char *spec,
                              const struct RlInstance *instance,
                              struct RlPolicy **out);

// # Safety
// `policy` must be null or a handle not yet freed.
void rl_policy_free(struct RlPolicy *policy);

// Evaluates `policy` on `instance` (exact when the support is small,
// otherwise `paths` seeded Monte Carlo draws).
//
// # Safety
// `instance` and `policy` must be live handles; `out` must point to
// writable memory for one `RlReport`.
enum RlStatus rl_evaluate(const struct RlInstance *instance,
                          const struct RlPolicy *policy,
                          uint64_t paths,
                          uint64_t seed,
                          struct RlReport *out);

// Solves the factor-revealing LP at `(n, mu)` and returns its optimum and
// the closed-form dual certificate.
//
// # Safety
// `primal` and `certificate` must point to writable `double`s.
enum RlStatus rl_lp_verify(uintptr_t n, double mu, double *primal, double *certificate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RATION_LAB_H */

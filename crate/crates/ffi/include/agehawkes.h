#ifndef AGEHAWKES_H
#define AGEHAWKES_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ah_status {
  AH_STATUS_OK = 0,
  AH_STATUS_NULL_POINTER = 1,
  AH_STATUS_INVALID_PARAMS = 2,
  AH_STATUS_DIVERGENT = 3,
  AH_STATUS_BRACKET_FAILURE = 4,
  AH_STATUS_INVALID_CONFIG = 5,
  AH_STATUS_INVALID_STOP_RULE = 6,
  AH_STATUS_BOUND_VIOLATION = 7,
  AH_STATUS_INSUFFICIENT_DATA = 8,
  AH_STATUS_INVALID_GRID = 9,
  AH_STATUS_INVALID_INITIAL_DENSITY = 10,
  AH_STATUS_NON_FINITE_STATE = 11,
  AH_STATUS_NOT_CONVERGED = 12,
  AH_STATUS_PANIC = 13,
} ah_status;

typedef enum ah_weight_law {
  // Every weight equals `alpha`.
  AH_WEIGHT_LAW_DIRAC = 0,
  // Weight 1 with probability `alpha`.
  AH_WEIGHT_LAW_BERNOULLI = 1,
} ah_weight_law;

typedef enum ah_init {
  // All mass at age `delta + 5 / (mu + 1)`.
  AH_INIT_DEFAULT = 0,
  // Fixed point of the discretized equation.
  AH_INIT_STATIONARY = 1,
  // Cell averages of the exact stationary density.
  AH_INIT_ANALYTIC = 2,
} ah_init;

// PDE solver state with its parameters.
typedef struct ah_pde ah_pde;

// Spike record of one simulation run.
typedef struct ah_record ah_record;

typedef struct ah_sim_config {
  size_t n;
  double mu;
  double alpha;
  double delta;
  // Time constant of the exponential kernel.
  double kernel_tau;
  uint64_t seed;
  enum ah_weight_law weight_law;
} ah_sim_config;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, NUL-terminated, static.
const char *ah_version(void);

// Name of a status code, NUL-terminated, static.
const char *ah_status_name(enum ah_status status);

// Message of the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *ah_last_error(void);

// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_steady_activity(double mu, double alpha, double delta, double *out);

// Stationary activity and interaction value.
//
// # Safety
// `out_a` and `out_x` must be null or valid for writes.
enum ah_status ah_stationary_state(double mu,
                                   double alpha,
                                   double delta,
                                   double *out_a,
                                   double *out_x);

// Sensitivity in terms of `(alpha, beta = mu delta)`; `inf` at the critical
// point `alpha = 1, beta = 0`.
//
// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_sensitivity(double alpha, double beta, double *out);

// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_sensitivity_derivative(double alpha, double beta, double *out);

// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_alpha_m(double beta, double *out);

// Limits of the steady activity as `mu -> 0` and `mu -> inf`.
//
// # Safety
// `out_low` and `out_high` must be null or valid for writes.
enum ah_status ah_activity_limits(double alpha, double delta, double *out_low, double *out_high);

// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_critical_taylor(double mu, double delta, double *out);

// Fills `out` with n = 1000, tau = 0.02, seed 1, Dirac weights and zero
// model parameters.
//
// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_sim_config_default(struct ah_sim_config *out);

// Runs one simulation. Stops after `max_spikes` spikes past `burn_in` if
// `max_spikes > 0`, otherwise at time `max_time`. On success `*out` owns a
// new record.
//
// # Safety
// `config` must be null or point to a valid config; `out` must be null or
// valid for a write.
enum ah_status ah_simulate(const struct ah_sim_config *config,
                           size_t max_spikes,
                           double max_time,
                           double burn_in,
                           struct ah_record **out);

// Number of spikes in the record, 0 for null.
//
// # Safety
// `record` must be null or a live record.
size_t ah_record_len(const struct ah_record *record);

// Copies up to `capacity` spikes, in time order, into `times` and
// `neurons`; the count copied goes to `out_copied`.
//
// # Safety
// `record` must be a live record; `times` and `neurons` must be valid for
// `capacity` writes; `out_copied` must be null or valid for a write.
enum ah_status ah_record_spikes(const struct ah_record *record,
                                double *times,
                                uint32_t *neurons,
                                size_t capacity,
                                size_t *out_copied);

// Rate per neuron over the first `k` spikes after `burn_in`, with its
// batch-means standard error.
//
// # Safety
// `record` must be a live record; out-pointers must be null or valid for
// writes.
enum ah_status ah_record_estimate(const struct ah_record *record,
                                  size_t k,
                                  double burn_in,
                                  double *out_rate,
                                  double *out_std_error);

// Fraction of thinning proposals that became spikes.
//
// # Safety
// `record` must be a live record; `out` must be null or valid for a write.
enum ah_status ah_record_acceptance_rate(const struct ah_record *record, double *out);

// # Safety
// `record` must be null or a record not yet freed.
void ah_record_free(struct ah_record *record);

// New PDE solver on the default grid for these parameters (ages up to
// `delta + 20 / (mu + alpha a_inf)`).
//
// # Safety
// `out` must be null or valid for a write.
enum ah_status ah_pde_new(double mu,
                          double alpha,
                          double delta,
                          double ds,
                          double kernel_tau,
                          enum ah_init init,
                          struct ah_pde **out);

// Advances `steps` time steps of size `ds`.
//
// # Safety
// `solver` must be a live solver.
enum ah_status ah_pde_step(struct ah_pde *solver, uint64_t steps);

// Current time, boundary activity, interaction value and total mass.
//
// # Safety
// `solver` must be a live solver; out-pointers must be null or valid for
// writes.
enum ah_status ah_pde_observe(const struct ah_pde *solver,
                              double *out_t,
                              double *out_a,
                              double *out_x,
                              double *out_mass);

// Steps until the relative spread of the activity over one convergence
// window is at most `tol`, or until time `max_t`. The solver keeps the final
// state either way; `AH_STATUS_NOT_CONVERGED` reports the second case.
//
// # Safety
// `solver` must be a live solver.
enum ah_status ah_pde_solve(struct ah_pde *solver, double tol, double max_t);

// # Safety
// `solver` must be null or a solver not yet freed.
void ah_pde_free(struct ah_pde *solver);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AGEHAWKES_H */

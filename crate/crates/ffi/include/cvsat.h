/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CVSAT_H
#define CVSAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvsatStatus {
  CVSAT_STATUS_OK = 0,
  CVSAT_STATUS_NULL_POINTER = 1,
  CVSAT_STATUS_INVALID_ARGUMENT = 2,
  CVSAT_STATUS_CONFIG = 3,
  CVSAT_STATUS_NO_POSITIVE_KEY = 4,
  CVSAT_STATUS_NO_FEASIBLE_DISTANCE = 5,
  CVSAT_STATUS_NUMERICAL = 6,
  CVSAT_STATUS_PANIC = 7,
} CvsatStatus;

typedef enum CvsatSeverity {
  CVSAT_SEVERITY_BASIC = 0,
  CVSAT_SEVERITY_MODERATE = 1,
  CVSAT_SEVERITY_HIGH = 2,
  CVSAT_SEVERITY_BEYOND_HIGH = 3,
} CvsatSeverity;

typedef enum CvsatStrategy {
  CVSAT_STRATEGY_COHERENT = 0,
  CVSAT_STRATEGY_INCOHERENT = 1,
} CvsatStrategy;

typedef enum CvsatExpertise {
  CVSAT_EXPERTISE_LAYMEN = 0,
  CVSAT_EXPERTISE_PROFICIENT = 1,
  CVSAT_EXPERTISE_EXPERT = 2,
  CVSAT_EXPERTISE_MULTIPLE_EXPERTS = 3,
} CvsatExpertise;

typedef enum CvsatKnowledge {
  CVSAT_KNOWLEDGE_PUBLIC = 0,
  CVSAT_KNOWLEDGE_RESTRICTED = 1,
  CVSAT_KNOWLEDGE_SENSITIVE = 2,
  CVSAT_KNOWLEDGE_CRITICAL = 3,
} CvsatKnowledge;

typedef enum CvsatWindow {
  CVSAT_WINDOW_UNNECESSARY = 0,
  CVSAT_WINDOW_EASY = 1,
  CVSAT_WINDOW_MODERATE = 2,
  CVSAT_WINDOW_DIFFICULT = 3,
} CvsatWindow;

typedef enum CvsatEquipment {
  CVSAT_EQUIPMENT_STANDARD = 0,
  CVSAT_EQUIPMENT_SPECIALIZED = 1,
  CVSAT_EQUIPMENT_BESPOKE = 2,
  CVSAT_EQUIPMENT_MULTIPLE_BESPOKE = 3,
  CVSAT_EQUIPMENT_QUANTUM = 4,
} CvsatEquipment;

// Opaque model: optimizer settings, strategy and success conditions.
typedef struct CvsatModel CvsatModel;

typedef struct CvsatEstimate {
  double t_sat;
  double xi_sat;
  double covariance;
  double v_b_sat;
} CvsatEstimate;

typedef struct CvsatSolution {
  double distance_km;
  double t;
  double v_a;
  double delta;
  double gain;
  double t_sat;
  double xi_sat;
  double xi_null;
  // May be `-inf` when the estimates leave the key rate undefined.
  double key_rate;
  double k_honest;
  bool feasible;
} CvsatSolution;

typedef struct CvsatClippedMoments {
  double mean;
  double variance;
  double prob_inside;
} CvsatClippedMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *cvsat_last_error(void);

// Library version as a static NUL-terminated string.
const char *cvsat_version(void);

// Model with built-in defaults; `strategy` is a [`CvsatStrategy`] value.
//
// # Safety
// `out` must be valid for writes of one pointer.
enum CvsatStatus cvsat_model_new(uint32_t strategy, struct CvsatModel **out);

// Model from a TOML experiment configuration.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` valid for writes of one pointer.
enum CvsatStatus cvsat_model_from_toml(const char *toml, struct CvsatModel **out);

// Releases a model; NULL is ignored.
//
// # Safety
// `model` is NULL or came from a `cvsat_model_*` constructor and was not freed.
void cvsat_model_free(struct CvsatModel *model);

// Switches the coherent strategy's residual phase noise off (`false`) or
// back to the configured model (`true`). No effect on the incoherent strategy.
//
// # Safety
// `model` must point to a live model.
enum CvsatStatus cvsat_model_set_phase_noise(struct CvsatModel *model, bool enabled);

// Large-sample estimator limits at one attack point.
//
// # Safety
// `model` must point to a live model; `out` valid for writes.
enum CvsatStatus cvsat_analytic_estimates(const struct CvsatModel *model,
                                          double v_a,
                                          double t,
                                          double delta,
                                          double gain,
                                          struct CvsatEstimate *out);

// Best attack at one distance. Infeasibility is reported through
// `feasible`, not as an error.
//
// # Safety
// `model` must point to a live model; `out` valid for writes.
enum CvsatStatus cvsat_optimize_attack(const struct CvsatModel *model,
                                       double distance_km,
                                       struct CvsatSolution *out);

// Shortest feasible distance in `[from_km, to_km]`.
//
// # Safety
// `model` must point to a live model; `out_km` valid for writes.
enum CvsatStatus cvsat_feasibility_boundary(const struct CvsatModel *model,
                                            double from_km,
                                            double to_km,
                                            double *out_km);

// Key rate in bits per pulse; negative values are returned as is.
//
// # Safety
// `out` must be valid for writes.
enum CvsatStatus cvsat_key_rate(double v_a,
                                double t,
                                double xi,
                                double eta,
                                double v_ele,
                                double beta,
                                double *out);

// Excess noise at which the key rate vanishes.
//
// # Safety
// `out` must be valid for writes.
enum CvsatStatus cvsat_null_key_threshold(double t,
                                          double v_a,
                                          double eta,
                                          double v_ele,
                                          double beta,
                                          double *out);

// Moments of a Gaussian clamped to `[alpha1, alpha2]`; infinite ends are allowed.
//
// # Safety
// `out` must be valid for writes.
enum CvsatStatus cvsat_clipped_moments(double mean,
                                       double variance,
                                       double alpha1,
                                       double alpha2,
                                       struct CvsatClippedMoments *out);

// Attack potential and severity. Levels are [`CvsatExpertise`],
// [`CvsatKnowledge`], [`CvsatWindow`] and [`CvsatEquipment`] values.
// `out_unbounded` is set when the rating
// relies on quantum equipment, in which case the severity is the top band.
//
// # Safety
// All out-pointers must be valid for writes.
enum CvsatStatus cvsat_attack_potential(uint32_t expertise,
                                        uint32_t knowledge,
                                        uint32_t window,
                                        uint32_t equipment,
                                        uint32_t *out_potential,
                                        enum CvsatSeverity *out_severity,
                                        bool *out_unbounded);

// Severity band of an attack potential.
//
// # Safety
// `out` must be valid for writes.
enum CvsatStatus cvsat_severity(int64_t attack_potential, enum CvsatSeverity *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVSAT_H */

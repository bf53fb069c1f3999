#ifndef ORTHOCAL_H
#define ORTHOCAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every call.
 */
typedef enum OrthocalStatus {
  ORTHOCAL_STATUS_OK = 0,
  ORTHOCAL_STATUS_NULL_POINTER = 1,
  ORTHOCAL_STATUS_INVALID_INPUT = 2,
  /*
   Point or joint values outside the reachable domain.
   */
  ORTHOCAL_STATUS_DOMAIN = 3,
  ORTHOCAL_STATUS_SINGULAR = 4,
  /*
   The identification system lost rank.
   */
  ORTHOCAL_STATUS_RANK = 5,
  /*
   The nonlinear solver did not converge.
   */
  ORTHOCAL_STATUS_CONVERGENCE = 6,
  ORTHOCAL_STATUS_JOINT_LIMIT = 7,
  /*
   Too many failed runs in a Monte-Carlo study.
   */
  ORTHOCAL_STATUS_TOO_MANY_FAILURES = 8,
  /*
   Internal error; the message names it.
   */
  ORTHOCAL_STATUS_PANIC = 9,
} OrthocalStatus;

/*
 Identification method.
 */
typedef enum OrthocalMethod {
  ORTHOCAL_METHOD_CLOSED_FORM = 0,
  ORTHOCAL_METHOD_LINEAR_SINGLE = 1,
  ORTHOCAL_METHOD_LINEAR6 = 2,
  ORTHOCAL_METHOD_LINEAR12 = 3,
  ORTHOCAL_METHOD_NONLINEAR6 = 4,
  ORTHOCAL_METHOD_NONLINEAR12 = 5,
} OrthocalMethod;

/*
 Opaque manipulator geometry.
 */
typedef struct OrthocalGeometry OrthocalGeometry;

/*
 Opaque calibration result.
 */
typedef struct OrthocalResult OrthocalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *orthocal_last_error(void);

/*
 Library version, a static string.
 */
const char *orthocal_version(void);

/*
 The prototype geometry (L = 310.25 mm, joint range -100..60 mm).
 */
enum OrthocalStatus orthocal_geometry_prototype(struct OrthocalGeometry **out);

/*
 A geometry with the given leg length and joint range about it, mm.
 */
enum OrthocalStatus orthocal_geometry_new(double leg_length,
                                          double rho_min,
                                          double rho_max,
                                          struct OrthocalGeometry **out);

/*
 Releases a geometry; null is ignored.
 */
void orthocal_geometry_free(struct OrthocalGeometry *geom);

/*
 Joint readings `rho_out[3]` that place the tool at `p[3]` given `offsets[3]`.
 */
enum OrthocalStatus orthocal_inverse_kinematics(const struct OrthocalGeometry *geom,
                                                const double *p,
                                                const double *offsets,
                                                double *rho_out);

/*
 Tool position `p_out[3]` for joint readings `rho[3]` and `offsets[3]`.
 */
enum OrthocalStatus orthocal_direct_kinematics(const struct OrthocalGeometry *geom,
                                               const double *rho,
                                               const double *offsets,
                                               double *p_out);

/*
 Noise-free reduced deviations `out[6]` for `offsets[3]`.
 */
enum OrthocalStatus orthocal_predict_reduced(const struct OrthocalGeometry *geom,
                                             const double *offsets,
                                             double *out);

/*
 Noise-free full double-posture deviations `out[12]` for `offsets[3]`.
 */
enum OrthocalStatus orthocal_predict_double(const struct OrthocalGeometry *geom,
                                            const double *offsets,
                                            double *out);

/*
 Number of measurement values `method` takes (6 or 12).
 */
size_t orthocal_value_count(enum OrthocalMethod method);

/*
 Name of input value `index` for `method`, or null when out of range.
 The string is static.
 */
const char *orthocal_value_name(enum OrthocalMethod method, size_t index);

/*
 Identifies the joint offsets from `n` measurement values in the order of
 [`orthocal_value_name`]. The result is written to `*out` and must be freed.
 */
enum OrthocalStatus orthocal_calibrate(const struct OrthocalGeometry *geom,
                                       enum OrthocalMethod method,
                                       const double *values,
                                       size_t n,
                                       struct OrthocalResult **out);

/*
 Releases a calibration result; null is ignored.
 */
void orthocal_result_free(struct OrthocalResult *result);

/*
 Identified offsets `out[3]`, mm.
 */
enum OrthocalStatus orthocal_result_offsets(const struct OrthocalResult *result, double *out);

/*
 Residual RMS and noise estimate, mm. Either output may be null.
 */
enum OrthocalStatus orthocal_result_fit(const struct OrthocalResult *result,
                                        double *residual_rms,
                                        double *sigma_hat);

/*
 Number of residuals held by the result.
 */
size_t orthocal_result_residual_count(const struct OrthocalResult *result);

/*
 Copies residual `index` (observed minus predicted, mm) and its name into
 `value` and `name` (`name_len` bytes including the terminator, may be null).
 */
enum OrthocalStatus orthocal_result_residual(const struct OrthocalResult *result,
                                             size_t index,
                                             double *value,
                                             char *name,
                                             size_t name_len);

/*
 Solver iterations (zero for linear methods).
 */
size_t orthocal_result_iterations(const struct OrthocalResult *result);

/*
 Analytic offset covariance `v_out[9]` (row major, mm^2) and `sigma_rho_out`
 for gauge noise `sigma`; `equations` is 6 or 12.
 */
enum OrthocalStatus orthocal_offset_covariance(const struct OrthocalGeometry *geom,
                                               double sigma,
                                               uint32_t equations,
                                               double *v_out,
                                               double *sigma_rho_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORTHOCAL_H */

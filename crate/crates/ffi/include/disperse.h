#ifndef DISPERSE_H
#define DISPERSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of an API call.
typedef enum DisperseStatus {
  DISPERSE_STATUS_OK = 0,
  // A required pointer argument was null.
  DISPERSE_STATUS_NULL_POINTER = 1,
  // Malformed input: bad JSON, wrong lengths, out-of-range index.
  DISPERSE_STATUS_INVALID_INPUT = 2,
  // The scene or start point failed validation.
  DISPERSE_STATUS_VALIDATION = 3,
  // A solver did not converge or the dynamics hit a degenerate case.
  DISPERSE_STATUS_NUMERICAL = 4,
  // A Rust panic was caught at the boundary.
  DISPERSE_STATUS_PANIC = 5,
} DisperseStatus;

// A validated billiard configuration.
typedef struct DisperseScene DisperseScene;

// A finished trajectory of the billiard map.
typedef struct DisperseTrajectory DisperseTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message on this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes). Returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t disperse_last_error(char *buf, uintptr_t len);

// Parses a scene from a NUL-terminated JSON string.
//
// # Safety
// `json` must be a valid C string; `out` must be writable.
enum DisperseStatus disperse_scene_from_json(const char *json, struct DisperseScene **out);

// Releases a scene. Null is ignored.
//
// # Safety
// `scene` must come from [`disperse_scene_from_json`] and not be used afterwards.
void disperse_scene_free(struct DisperseScene *scene);

// Ambient dimension, or 0 for a null handle.
//
// # Safety
// `scene` must be null or a live handle.
uintptr_t disperse_scene_dimension(const struct DisperseScene *scene);

// Number of scatterers in the fundamental domain, or 0 for a null handle.
//
// # Safety
// `scene` must be null or a live handle.
uintptr_t disperse_scene_scatterer_count(const struct DisperseScene *scene);

// Runs the scene checks; `*valid` is 1 when every check passes.
//
// # Safety
// `scene` must be a live handle and `valid` writable.
enum DisperseStatus disperse_scene_validate(const struct DisperseScene *scene,
                                            uintptr_t samples,
                                            uint64_t seed,
                                            int *valid);

// Iterates the billiard map `steps` times from `(q, v)` on scatterer `base`
// (origin cell). `q` and `v` hold `dimension` doubles each; `v` is the
// outgoing velocity and is normalized.
//
// # Safety
// `scene` must be live, `q`/`v` readable for `dimension` doubles, `out` writable.
enum DisperseStatus disperse_simulate(const struct DisperseScene *scene,
                                      uintptr_t base,
                                      const double *q,
                                      const double *v,
                                      uintptr_t steps,
                                      struct DisperseTrajectory **out);

// Like [`disperse_simulate`] from a seeded uniform random start.
//
// # Safety
// `scene` must be live and `out` writable.
enum DisperseStatus disperse_simulate_random(const struct DisperseScene *scene,
                                             uint64_t seed,
                                             uintptr_t steps,
                                             struct DisperseTrajectory **out);

// Releases a trajectory. Null is ignored.
//
// # Safety
// `traj` must come from a simulate call and not be used afterwards.
void disperse_trajectory_free(struct DisperseTrajectory *traj);

// Number of recorded collisions, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
uintptr_t disperse_trajectory_len(const struct DisperseTrajectory *traj);

// 1 when the trajectory ran all requested steps, 0 when it stopped early.
//
// # Safety
// `traj` must be null or a live handle.
int disperse_trajectory_completed(const struct DisperseTrajectory *traj);

// Collision `index`: base scatterer, hit point (`dimension` doubles), flight
// time, `cos phi` and the tangency flag. Any output pointer may be null.
//
// # Safety
// `traj` must be live; non-null outputs must be writable (`q` for `dimension` doubles).
enum DisperseStatus disperse_trajectory_event(const struct DisperseTrajectory *traj,
                                              uintptr_t index,
                                              uintptr_t *base,
                                              double *q,
                                              double *t_flight,
                                              double *cos_phi,
                                              int *tangency);

// A random line tangent to scatterer `base`: point `p` and unit direction `v`
// (`dimension` doubles each, `(p, v) = 0`) and the contact parameter.
//
// # Safety
// `scene` must be live; `p`, `v` writable for `dimension` doubles; `t_star` writable or null.
enum DisperseStatus disperse_tangent_line(const struct DisperseScene *scene,
                                          uintptr_t base,
                                          uint64_t seed,
                                          double *p,
                                          double *v,
                                          double *t_star);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISPERSE_H */

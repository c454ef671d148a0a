#ifndef SNOWGLOBE_H
#define SNOWGLOBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgMode {
  SG_MODE_SINGLE = 0,
  SG_MODE_MULTI = 1,
} SgMode;

typedef enum SgPlacement {
  SG_PLACEMENT_DISTANCE = 0,
  SG_PLACEMENT_ANGLE = 1,
  SG_PLACEMENT_CIRCUMCENTER = 2,
} SgPlacement;

/**
 * Result of every fallible call.
 */
typedef enum SgStatus {
  SG_OK = 0,
  SG_ERR_NULL = 1,
  SG_ERR_ARGUMENT = 2,
  SG_ERR_INVALID_PLC = 3,
  SG_ERR_CONFIG = 4,
  SG_ERR_PARSE = 5,
  SG_ERR_IO = 6,
  SG_ERR_INSERTION_CAP = 7,
  SG_ERR_INTERNAL = 8,
  SG_ERR_PANIC = 9,
  SG_ERR_BUFFER_TOO_SMALL = 10,
} SgStatus;

/**
 * Refinement parameters.
 */
typedef struct SgConfig SgConfig;

/**
 * Input geometry under construction.
 */
typedef struct SgPlc SgPlc;

/**
 * A finished refinement.
 */
typedef struct SgResult SgResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *sg_last_error(void);

/**
 * Library version as a static string.
 */
const char *sg_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void sg_string_free(char *s);

/**
 * Empty PLC of dimension 2 or 3; NULL for any other value.
 */
struct SgPlc *sg_plc_new(int dim);

/**
 * Reads a `.poly` or `.smesh` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SgStatus sg_plc_read(const char *path, struct SgPlc **out);

/**
 * # Safety
 * `plc` must come from `sg_plc_new`/`sg_plc_read` and not be used after.
 */
void sg_plc_free(struct SgPlc *plc);

/**
 * Appends a vertex; `xyz` holds `dim` coordinates. Its index is written to
 * `index` when non-NULL.
 *
 * # Safety
 * `plc` must be a live handle and `xyz` point at `dim` doubles.
 */
enum SgStatus sg_plc_add_vertex(struct SgPlc *plc, const double *xyz, size_t *index);

/**
 * Adds a segment between two existing vertices.
 *
 * # Safety
 * `plc` must be a live handle.
 */
enum SgStatus sg_plc_add_segment(struct SgPlc *plc, size_t a, size_t b);

/**
 * Adds a planar polygonal facet (3D only) given as a vertex loop.
 *
 * # Safety
 * `plc` must be a live handle and `loop_` point at `n` indices.
 */
enum SgStatus sg_plc_add_facet(struct SgPlc *plc, const size_t *loop_, size_t n);

/**
 * Marks the region containing `xyz` as a hole.
 *
 * # Safety
 * `plc` must be a live handle and `xyz` point at `dim` doubles.
 */
enum SgStatus sg_plc_add_hole(struct SgPlc *plc, const double *xyz);

/**
 * Checks the PLC without refining it.
 *
 * # Safety
 * `plc` must be a live handle.
 */
enum SgStatus sg_plc_validate(const struct SgPlc *plc);

/**
 * Default parameters for dimension 2 or 3; NULL otherwise.
 */
struct SgConfig *sg_config_new(int dim);

/**
 * # Safety
 * `cfg` must come from `sg_config_new` and not be used after.
 */
void sg_config_free(struct SgConfig *cfg);

/**
 * Target radius-edge ratio; also resets the derived band and sliver
 * limits. The config is left unchanged if the result is inconsistent.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SgStatus sg_config_set_rho_star(struct SgConfig *cfg, double rho_star);

/**
 * Sizing slack; also resets the band's upper end.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SgStatus sg_config_set_alpha(struct SgConfig *cfg, double alpha);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum SgStatus sg_config_set_sigma_star(struct SgConfig *cfg, double sigma_star);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum SgStatus sg_config_set_max_insertions(struct SgConfig *cfg, size_t max_insertions);

/**
 * Nonzero enables the input preprocessing pass.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum SgStatus sg_config_set_preprocess(struct SgConfig *cfg, int on);

/**
 * # Safety
 * `cfg` must be a live handle and the value one of the declared enumerators.
 */
enum SgStatus sg_config_set_placement(struct SgConfig *cfg, enum SgPlacement placement);

/**
 * # Safety
 * `cfg` must be a live handle and the value one of the declared enumerators.
 */
enum SgStatus sg_config_set_mode(struct SgConfig *cfg, enum SgMode mode);

/**
 * Refines `plc` under `cfg`. On success `*out` receives a result handle.
 *
 * # Safety
 * `plc` and `cfg` must be live handles; `out` must be writable.
 */
enum SgStatus sg_refine(const struct SgPlc *plc, const struct SgConfig *cfg, struct SgResult **out);

/**
 * # Safety
 * `res` must come from `sg_refine` and not be used after.
 */
void sg_result_free(struct SgResult *res);

/**
 * Number of output vertices (0 for NULL).
 *
 * # Safety
 * `res` must be a live handle or NULL.
 */
size_t sg_result_vertex_count(const struct SgResult *res);

/**
 * Number of output elements (0 for NULL).
 *
 * # Safety
 * `res` must be a live handle or NULL.
 */
size_t sg_result_element_count(const struct SgResult *res);

/**
 * Copies vertex coordinates, `dim` per vertex, into `buf` (capacity `len`
 * doubles). Order matches the `.node` output.
 *
 * # Safety
 * `res` must be a live handle and `buf` hold `len` doubles.
 */
enum SgStatus sg_result_vertices(const struct SgResult *res, double *buf, size_t len);

/**
 * Copies element vertex indices (0-based, into the vertex array),
 * `dim + 1` per element.
 *
 * # Safety
 * `res` must be a live handle and `buf` hold `len` entries.
 */
enum SgStatus sg_result_elements(const struct SgResult *res, size_t *buf, size_t len);

/**
 * Insertion log as JSON lines. Free with `sg_string_free`.
 *
 * # Safety
 * `res` must be a live handle and `out` writable.
 */
enum SgStatus sg_result_events_jsonl(const struct SgResult *res, char **out);

/**
 * Writes `<stem>.node`, `<stem>.ele` and, if `events` is non-NULL, the
 * event log with its manifest line.
 *
 * # Safety
 * `res` and `cfg` must be live handles; paths NUL-terminated or NULL.
 */
enum SgStatus sg_result_write(const struct SgResult *res,
                              const struct SgConfig *cfg,
                              const char *stem,
                              const char *events);

/**
 * Runs the audit suite. `*pass` is set to 1 or 0; when `report` is
 * non-NULL it receives the JSON report (free with `sg_string_free`).
 *
 * # Safety
 * Handles must be live; `pass` writable; `report` writable or NULL.
 */
enum SgStatus sg_result_audit(const struct SgPlc *plc,
                              const struct SgResult *res,
                              const struct SgConfig *cfg,
                              int baseline,
                              int *pass,
                              char **report);

/**
 * The event log with a manifest header line, as written by the CLI.
 *
 * # Safety
 * `res` and `cfg` must be live handles; `out` writable.
 */
enum SgStatus sg_result_events_with_manifest(const struct SgResult *res,
                                             const struct SgConfig *cfg,
                                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNOWGLOBE_H */

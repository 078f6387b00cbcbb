#ifndef TOPORECON_H
#define TOPORECON_H

/* generated by cbindgen from toporecon-ffi; do not edit */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TrStatus {
  TR_OK = 0,
  TR_NULL_ARGUMENT = 1,
  TR_INVALID_UTF8 = 2,
  TR_PARSE_ERROR = 3,
  TR_INVALID_CONFIG = 4,
  TR_DEGENERATE_INPUT = 5,
  TR_NUMERIC_FAILURE = 6,
  TR_TOPOLOGY_FAILURE = 7,
  TR_IO_ERROR = 8,
  TR_BUFFER_TOO_SMALL = 9,
  TR_INTERNAL = 10,
} TrStatus;

/**
 * An input point cloud (opaque).
 */
typedef struct TrCloud TrCloud;

/**
 * A reconstructed surface mesh (opaque).
 */
typedef struct TrMesh TrMesh;

/**
 * Tuning knobs for reconstruction. Zero-initialize and pass to
 * `tr_options_default` first; zero/negative fields then mean "default".
 */
typedef struct TrOptions {
  /**
   * Base grid resolution (0 = 32 in 2D, 24 in 3D).
   */
  size_t base_res;
  /**
   * Extra field-weighted vertices (0 = base_res^d / 4).
   */
  size_t extra;
  double learning_rate;
  size_t max_iters;
  double plateau_tol;
  size_t plateau_window;
  uint64_t rng_seed;
} TrOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tr_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *tr_version(void);

enum TrStatus tr_options_default(struct TrOptions *out);

/**
 * Load a point cloud from an .xyz or .ply file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 * On success `*out` owns the cloud and must be released with
 * `tr_cloud_free`.
 */
enum TrStatus tr_cloud_load(const char *path, struct TrCloud **out);

/**
 * Build a cloud from an interleaved coordinate buffer (`n * dim` doubles,
 * dim 2 or 3).
 *
 * # Safety
 * `coords` must point to `n * dim` readable doubles; `out` must be valid.
 */
enum TrStatus tr_cloud_from_points(const double *coords,
                                   size_t n,
                                   size_t dim,
                                   struct TrCloud **out);

/**
 * Sample one of the built-in synthetic shapes.
 *
 * # Safety
 * `name` must be NUL-terminated; `out` must be valid.
 */
enum TrStatus tr_cloud_synth(const char *name,
                             size_t n,
                             uint64_t seed,
                             double jitter,
                             struct TrCloud **out);

size_t tr_cloud_len(const struct TrCloud *cloud);

size_t tr_cloud_dim(const struct TrCloud *cloud);

/**
 * # Safety
 * `cloud` must come from a `tr_cloud_*` constructor and not be freed twice.
 */
void tr_cloud_free(struct TrCloud *cloud);

/**
 * Run the full pipeline on a cloud with a loss specification given as
 * JSON (`{"terms": [{"dim":1,"index":1,"weight":-1.0}, ...],
 * "target_counts": {"1": 1}}`).
 *
 * # Safety
 * `cloud` must be a live handle, `loss_json` NUL-terminated, `opts` and
 * `out` valid. On success `*out` must be freed with `tr_mesh_free`.
 */
enum TrStatus tr_reconstruct(const struct TrCloud *cloud,
                             const char *loss_json,
                             const struct TrOptions *opts,
                             struct TrMesh **out);

/**
 * Run the pipeline from a JSON run configuration (same schema as the CLI
 * `--config` file) and write the artifact set to its `out_dir`.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out` may be null when the mesh
 * handle is not wanted.
 */
enum TrStatus tr_run_config(const char *config_json, struct TrMesh **out);

size_t tr_mesh_vertex_count(const struct TrMesh *mesh);

size_t tr_mesh_simplex_count(const struct TrMesh *mesh);

/**
 * Dimension of the mesh simplices (1 = polyline, 2 = triangles).
 */
size_t tr_mesh_dim(const struct TrMesh *mesh);

/**
 * Copy vertex coordinates into `buf` (xyz-interleaved, `cap` doubles).
 *
 * # Safety
 * `buf` must hold at least `cap` doubles.
 */
enum TrStatus tr_mesh_copy_vertices(const struct TrMesh *mesh, double *buf, size_t cap);

/**
 * Copy simplex vertex indices into `buf` ((dim+1)-interleaved, `cap`
 * entries).
 *
 * # Safety
 * `buf` must hold at least `cap` u32 values.
 */
enum TrStatus tr_mesh_copy_indices(const struct TrMesh *mesh, uint32_t *buf, size_t cap);

/**
 * Write Betti numbers 0..=dim into `buf`; `*written` gets the count.
 *
 * # Safety
 * `buf` must hold at least `cap` entries; `written` must be valid.
 */
enum TrStatus tr_mesh_betti(const struct TrMesh *mesh, size_t *buf, size_t cap, size_t *written);

/**
 * Write the mesh as OBJ.
 *
 * # Safety
 * `path` must be NUL-terminated; `mesh` a live handle.
 */
enum TrStatus tr_mesh_write_obj(const struct TrMesh *mesh, const char *path);

/**
 * # Safety
 * `mesh` must come from a `tr_*` constructor and not be freed twice.
 */
void tr_mesh_free(struct TrMesh *mesh);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TOPORECON_H */

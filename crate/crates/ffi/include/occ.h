#ifndef OCC_H
#define OCC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum OccStatus {
  OCC_STATUS_OK = 0,
  OCC_STATUS_NULL_POINTER = 1,
  OCC_STATUS_INVALID_ARGUMENT = 2,
  OCC_STATUS_OUT_OF_RANGE = 3,
  OCC_STATUS_INCOMPATIBLE = 4,
  OCC_STATUS_IO = 5,
  OCC_STATUS_FORMAT = 6,
  OCC_STATUS_UNDEFINED = 7,
  OCC_STATUS_PANIC = 8,
  OCC_STATUS_INTERNAL = 9,
} OccStatus;

// Opaque multi-channel feature volume.
typedef struct OccFeatures OccFeatures;

// Opaque occupancy grid.
typedef struct OccGrid OccGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the calling thread's last error message, without the
// terminating NUL. Zero after a successful call.
size_t occ_last_error_length(void);

// Copies the last error message into `buf` (NUL-terminated, truncated to
// `len - 1` bytes) and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t occ_last_error_message(char *buf, size_t len);

// All-empty grid over `dims[0]×dims[1]×dims[2]` cells of `voxel_size`
// starting at `origin`.
//
// # Safety
// `origin` and `dims` point to 3 values; `out` is writable.
enum OccStatus occ_grid_new(const double *origin,
                            const size_t *dims,
                            double voxel_size,
                            struct OccGrid **out);

// # Safety
// `grid` is null or a handle not yet freed.
void occ_grid_free(struct OccGrid *grid);

// # Safety
// `grid` is a live handle; `dims` points to 3 writable values.
enum OccStatus occ_grid_dims(const struct OccGrid *grid, size_t *dims);

// # Safety
// `grid` is a live handle; `out` is writable.
enum OccStatus occ_grid_get(const struct OccGrid *grid, size_t i, size_t j, size_t k, uint8_t *out);

// # Safety
// `grid` is a live handle.
enum OccStatus occ_grid_set(struct OccGrid *grid, size_t i, size_t j, size_t k, uint8_t label);

// Borrowed view of all labels in linear order; valid until the grid is
// modified or freed. Writes the voxel count to `len`.
//
// # Safety
// `grid` is a live handle; `len` is writable.
const uint8_t *occ_grid_labels(const struct OccGrid *grid, size_t *len);

// Overwrites every label; `len` must equal the voxel count.
//
// # Safety
// `grid` is a live handle; `labels` points to `len` values.
enum OccStatus occ_grid_set_labels(struct OccGrid *grid, const uint8_t *labels, size_t len);

// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum OccStatus occ_grid_read(const char *path, struct OccGrid **out);

// # Safety
// `grid` is a live handle; `path` is a NUL-terminated string.
enum OccStatus occ_grid_write(const struct OccGrid *grid, const char *path);

// Zero-filled feature volume with `channels` channels.
//
// # Safety
// `origin` and `dims` point to 3 values; `out` is writable.
enum OccStatus occ_features_new(const double *origin,
                                const size_t *dims,
                                double voxel_size,
                                size_t channels,
                                struct OccFeatures **out);

// # Safety
// `features` is null or a handle not yet freed.
void occ_features_free(struct OccFeatures *features);

// # Safety
// `features` is a live handle.
size_t occ_features_channels(const struct OccFeatures *features);

// Mutable view of the channel-major data; valid until the volume is freed.
// Writes the value count to `len`.
//
// # Safety
// `features` is a live handle; `len` is writable.
double *occ_features_data(struct OccFeatures *features, size_t *len);

// # Safety
// `features` is a live handle; `out` is writable.
enum OccStatus occ_features_get(const struct OccFeatures *features,
                                size_t channel,
                                size_t i,
                                size_t j,
                                size_t k,
                                double *out);

// # Safety
// `features` is a live handle.
enum OccStatus occ_features_set(struct OccFeatures *features,
                                size_t channel,
                                size_t i,
                                size_t j,
                                size_t k,
                                double value);

// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum OccStatus occ_features_read(const char *path, struct OccFeatures **out);

// # Safety
// `features` is a live handle; `path` is a NUL-terminated string.
enum OccStatus occ_features_write(const struct OccFeatures *features, const char *path);

// Geometric IoU and mIoU of `pred` against `gt` under the default
// seven-class label map. Noise voxels of `gt` are ignored.
//
// # Safety
// Handles are live; `iou` and `miou` are writable.
enum OccStatus occ_eval(const struct OccGrid *pred,
                        const struct OccGrid *gt,
                        bool strict_n_classes,
                        double *iou,
                        double *miou);

// Re-expresses `src` seen at `pose_src` in the frame of `pose_tgt`. Poses
// are ego → world, 12 row-major values of the top 3×4 block.
//
// # Safety
// `src` is live; poses point to 12 values; `out` is writable.
enum OccStatus occ_align_volume(const struct OccFeatures *src,
                                const double *pose_src,
                                const double *pose_tgt,
                                struct OccFeatures **out);

// `sigmoid(w)·f_l + (1 − sigmoid(w))·f_i`, voxel- and channel-wise.
//
// # Safety
// Handles are live; `out` is writable.
enum OccStatus occ_adaptive_fuse(const struct OccFeatures *f_i,
                                 const struct OccFeatures *f_l,
                                 const struct OccFeatures *w,
                                 struct OccFeatures **out);

// `sign ×` the masked cosine mean of `f_i` and `f_l`, masked by the
// occupied non-noise voxels of `gt`.
//
// # Safety
// Handles are live; `out` is writable.
enum OccStatus occ_distill_loss(const struct OccFeatures *f_i,
                                const struct OccFeatures *f_l,
                                const struct OccGrid *gt,
                                double sign,
                                double *out);

// Mean cross-entropy of per-voxel logits (channel = class) against `gt`.
//
// # Safety
// Handles are live; `out` is writable.
enum OccStatus occ_cross_entropy(const struct OccFeatures *logits,
                                 const struct OccGrid *gt,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCC_H */

//! C ABI over `occ-core`.
//!
//! Grids and feature volumes cross the boundary as opaque handles created by
//! `occ_*_new` / `occ_*_read` and released with the matching `occ_*_free`.
//! Every fallible call returns an [`OccStatus`]; on failure the message is
//! kept per thread and can be fetched with [`occ_last_error_message`].
//! Feature data is channel-major: `data[c * nx*ny*nz + (i*ny + j)*nz + k]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use occ_core::grid::{FeatureVolume, GridSpec, LabelMap, OccupancyGrid};
use occ_core::metrics::EvalReport;
use occ_core::offmath::{self, LossConfig};
use occ_core::pose::RigidPose;
use occ_core::{io, OccError, Point3};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Incompatible = 4,
    Io = 5,
    Format = 6,
    Undefined = 7,
    Panic = 8,
    Internal = 9,
}

/// Opaque occupancy grid.
pub struct OccGrid(OccupancyGrid);

/// Opaque multi-channel feature volume.
pub struct OccFeatures(FeatureVolume);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.replace('\0', " ").into_bytes());
}

fn status_of(err: &OccError) -> OccStatus {
    match err {
        OccError::Stage { source, .. } => status_of(source),
        OccError::OutOfRange { .. } => OccStatus::OutOfRange,
        OccError::IncompatibleGrid(_) | OccError::IncompatibleShape(_) => OccStatus::Incompatible,
        OccError::Io(_) | OccError::File { .. } => OccStatus::Io,
        OccError::MalformedFile { .. } | OccError::Format(_) | OccError::Parse { .. } => OccStatus::Format,
        OccError::UndefinedLoss(_) | OccError::UndefinedMetric(_) => OccStatus::Undefined,
        OccError::SolverNotConverged { .. } => OccStatus::Internal,
        _ => OccStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(OccError),
}

impl From<OccError> for Failure {
    fn from(e: OccError) -> Self {
        Failure::Core(e)
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> OccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            OccStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            OccStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(&msg);
            OccStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside occ");
            OccStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn pose_arg(p: *const f64) -> Result<RigidPose, Failure> {
    if p.is_null() {
        return Err(Failure::Null("pose"));
    }
    let rows: [f64; 12] = std::slice::from_raw_parts(p, 12).try_into().expect("12 values");
    Ok(RigidPose::from_rows_3x4(&rows)?)
}

unsafe fn spec_arg(origin: *const f64, dims: *const usize, voxel_size: f64) -> Result<GridSpec, Failure> {
    let o = std::slice::from_raw_parts(deref(origin, "origin")?, 3);
    let d = std::slice::from_raw_parts(deref(dims, "dims")?, 3);
    Ok(GridSpec::new(Point3::new(o[0], o[1], o[2]), [d[0], d[1], d[2]], voxel_size)?)
}

fn check_index(spec: &GridSpec, index: [usize; 3]) -> Result<(), Failure> {
    if spec.contains_index(index) {
        Ok(())
    } else {
        Err(OccError::OutOfRange { index, dims: spec.dims }.into())
    }
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> FfiResult {
    let slot = deref_mut(out, "out")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Length in bytes of the calling thread's last error message, without the
/// terminating NUL. Zero after a successful call.
#[no_mangle]
pub extern "C" fn occ_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn occ_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// All-empty grid over `dims[0]×dims[1]×dims[2]` cells of `voxel_size`
/// starting at `origin`.
///
/// # Safety
/// `origin` and `dims` point to 3 values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_new(
    origin: *const f64,
    dims: *const usize,
    voxel_size: f64,
    out: *mut *mut OccGrid,
) -> OccStatus {
    guard(|| {
        let spec = spec_arg(origin, dims, voxel_size)?;
        emit(out, OccGrid(OccupancyGrid::empty(spec)))
    })
}

/// # Safety
/// `grid` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_free(grid: *mut OccGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` is a live handle; `dims` points to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_dims(grid: *const OccGrid, dims: *mut usize) -> OccStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let d = std::slice::from_raw_parts_mut(deref_mut(dims, "dims")?, 3);
        d.copy_from_slice(&g.0.spec().dims);
        Ok(())
    })
}

/// # Safety
/// `grid` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_get(grid: *const OccGrid, i: usize, j: usize, k: usize, out: *mut u8) -> OccStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        check_index(g.0.spec(), [i, j, k])?;
        *deref_mut(out, "out")? = g.0.get([i, j, k]);
        Ok(())
    })
}

/// # Safety
/// `grid` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_set(grid: *mut OccGrid, i: usize, j: usize, k: usize, label: u8) -> OccStatus {
    guard(|| {
        let g = deref_mut(grid, "grid")?;
        check_index(g.0.spec(), [i, j, k])?;
        g.0.set([i, j, k], label);
        Ok(())
    })
}

/// Borrowed view of all labels in linear order; valid until the grid is
/// modified or freed. Writes the voxel count to `len`.
///
/// # Safety
/// `grid` is a live handle; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_labels(grid: *const OccGrid, len: *mut usize) -> *const u8 {
    let Some(g) = grid.as_ref() else {
        set_error("null pointer: grid");
        return ptr::null();
    };
    if let Some(l) = len.as_mut() {
        *l = g.0.labels().len();
    }
    g.0.labels().as_ptr()
}

/// Overwrites every label; `len` must equal the voxel count.
///
/// # Safety
/// `grid` is a live handle; `labels` points to `len` values.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_set_labels(grid: *mut OccGrid, labels: *const u8, len: usize) -> OccStatus {
    guard(|| {
        let g = deref_mut(grid, "grid")?;
        let src = std::slice::from_raw_parts(deref(labels, "labels")?, len);
        let dst = g.0.labels_mut();
        if dst.len() != len {
            return Err(Failure::Arg(format!("expected {} labels, got {len}", dst.len())));
        }
        dst.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_read(path: *const c_char, out: *mut *mut OccGrid) -> OccStatus {
    guard(|| {
        let grid = io::read_grid(&path_arg(path)?)?;
        emit(out, OccGrid(grid))
    })
}

/// # Safety
/// `grid` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn occ_grid_write(grid: *const OccGrid, path: *const c_char) -> OccStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        io::write_grid(&path_arg(path)?, &g.0)?;
        Ok(())
    })
}

/// Zero-filled feature volume with `channels` channels.
///
/// # Safety
/// `origin` and `dims` point to 3 values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_features_new(
    origin: *const f64,
    dims: *const usize,
    voxel_size: f64,
    channels: usize,
    out: *mut *mut OccFeatures,
) -> OccStatus {
    guard(|| {
        let spec = spec_arg(origin, dims, voxel_size)?;
        if channels == 0 {
            return Err(Failure::Arg("channels must be positive".into()));
        }
        emit(out, OccFeatures(FeatureVolume::zeros(spec, channels)))
    })
}

/// # Safety
/// `features` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn occ_features_free(features: *mut OccFeatures) {
    if !features.is_null() {
        drop(Box::from_raw(features));
    }
}

/// # Safety
/// `features` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn occ_features_channels(features: *const OccFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.0.channels())
}

/// Mutable view of the channel-major data; valid until the volume is freed.
/// Writes the value count to `len`.
///
/// # Safety
/// `features` is a live handle; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_features_data(features: *mut OccFeatures, len: *mut usize) -> *mut f64 {
    let Some(f) = features.as_mut() else {
        set_error("null pointer: features");
        return ptr::null_mut();
    };
    if let Some(l) = len.as_mut() {
        *l = f.0.data().len();
    }
    f.0.data_mut().as_mut_ptr()
}

/// # Safety
/// `features` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_features_get(
    features: *const OccFeatures,
    channel: usize,
    i: usize,
    j: usize,
    k: usize,
    out: *mut f64,
) -> OccStatus {
    guard(|| {
        let f = deref(features, "features")?;
        check_index(f.0.spec(), [i, j, k])?;
        if channel >= f.0.channels() {
            return Err(Failure::Arg(format!("channel {channel} of {}", f.0.channels())));
        }
        *deref_mut(out, "out")? = f.0.get(channel, [i, j, k]);
        Ok(())
    })
}

/// # Safety
/// `features` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn occ_features_set(
    features: *mut OccFeatures,
    channel: usize,
    i: usize,
    j: usize,
    k: usize,
    value: f64,
) -> OccStatus {
    guard(|| {
        let f = deref_mut(features, "features")?;
        check_index(f.0.spec(), [i, j, k])?;
        if channel >= f.0.channels() {
            return Err(Failure::Arg(format!("channel {channel} of {}", f.0.channels())));
        }
        f.0.set(channel, [i, j, k], value);
        Ok(())
    })
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_features_read(path: *const c_char, out: *mut *mut OccFeatures) -> OccStatus {
    guard(|| {
        let f = io::read_features(&path_arg(path)?)?;
        emit(out, OccFeatures(f))
    })
}

/// # Safety
/// `features` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn occ_features_write(features: *const OccFeatures, path: *const c_char) -> OccStatus {
    guard(|| {
        let f = deref(features, "features")?;
        io::write_features(&path_arg(path)?, &f.0)?;
        Ok(())
    })
}

/// Geometric IoU and mIoU of `pred` against `gt` under the default
/// seven-class label map. Noise voxels of `gt` are ignored.
///
/// # Safety
/// Handles are live; `iou` and `miou` are writable.
#[no_mangle]
pub unsafe extern "C" fn occ_eval(
    pred: *const OccGrid,
    gt: *const OccGrid,
    strict_n_classes: bool,
    iou: *mut f64,
    miou: *mut f64,
) -> OccStatus {
    guard(|| {
        let report = EvalReport::from_grids(
            &deref(pred, "pred")?.0,
            &deref(gt, "gt")?.0,
            &LabelMap::default(),
            strict_n_classes,
        )?;
        *deref_mut(iou, "iou")? = report.iou;
        *deref_mut(miou, "miou")? = report.miou;
        Ok(())
    })
}

/// Re-expresses `src` seen at `pose_src` in the frame of `pose_tgt`. Poses
/// are ego → world, 12 row-major values of the top 3×4 block.
///
/// # Safety
/// `src` is live; poses point to 12 values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_align_volume(
    src: *const OccFeatures,
    pose_src: *const f64,
    pose_tgt: *const f64,
    out: *mut *mut OccFeatures,
) -> OccStatus {
    guard(|| {
        let f = deref(src, "src")?;
        let aligned = offmath::align_volume(&f.0, &pose_arg(pose_src)?, &pose_arg(pose_tgt)?);
        emit(out, OccFeatures(aligned))
    })
}

/// `sigmoid(w)·f_l + (1 − sigmoid(w))·f_i`, voxel- and channel-wise.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_adaptive_fuse(
    f_i: *const OccFeatures,
    f_l: *const OccFeatures,
    w: *const OccFeatures,
    out: *mut *mut OccFeatures,
) -> OccStatus {
    guard(|| {
        let fused = offmath::adaptive_fuse(&deref(f_i, "f_i")?.0, &deref(f_l, "f_l")?.0, &deref(w, "w")?.0)?;
        emit(out, OccFeatures(fused))
    })
}

/// `sign ×` the masked cosine mean of `f_i` and `f_l`, masked by the
/// occupied non-noise voxels of `gt`.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_distill_loss(
    f_i: *const OccFeatures,
    f_l: *const OccFeatures,
    gt: *const OccGrid,
    sign: f64,
    out: *mut f64,
) -> OccStatus {
    guard(|| {
        let mask = offmath::occupancy_mask(&deref(gt, "gt")?.0);
        let cfg = LossConfig {
            distill_sign: sign,
            ..LossConfig::default()
        };
        *deref_mut(out, "out")? = offmath::distill_loss(&deref(f_i, "f_i")?.0, &deref(f_l, "f_l")?.0, &mask, &cfg)?;
        Ok(())
    })
}

/// Mean cross-entropy of per-voxel logits (channel = class) against `gt`.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn occ_cross_entropy(logits: *const OccFeatures, gt: *const OccGrid, out: *mut f64) -> OccStatus {
    guard(|| {
        *deref_mut(out, "out")? = offmath::cross_entropy_loss(&deref(logits, "logits")?.0, &deref(gt, "gt")?.0)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let n = occ_last_error_length();
        let mut buf = vec![0 as c_char; n + 1];
        unsafe { occ_last_error_message(buf.as_mut_ptr(), buf.len()) };
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn errors_map_to_codes() {
        assert_eq!(status_of(&OccError::IncompatibleGrid("x".into())), OccStatus::Incompatible);
        assert_eq!(
            status_of(&OccError::UndefinedMetric("x".into()).in_stage("eval")),
            OccStatus::Undefined
        );
        let status = unsafe { occ_grid_dims(ptr::null(), ptr::null_mut()) };
        assert_eq!(status, OccStatus::NullPointer);
        assert_eq!(last_error(), "null pointer: grid");
    }

    #[test]
    fn truncated_message() {
        set_error("abcdef");
        let mut buf = [1 as c_char; 4];
        assert_eq!(unsafe { occ_last_error_message(buf.as_mut_ptr(), 4) }, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes(), b"abc");
    }

    #[test]
    fn panics_are_contained() {
        assert_eq!(guard(|| panic!("boom")), OccStatus::Panic);
        assert_eq!(last_error(), "panic inside occ");
    }
}

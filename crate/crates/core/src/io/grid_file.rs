//! Binary lattice files, little-endian throughout.
//!
//! WOCC: `"WOCC"`, u16 version, 3×u32 dims, f32 voxel size, 3×f32 origin,
//! then one label byte per voxel in x-major order (34-byte header).
//!
//! WFEA: `"WFEA"`, u16 version, u32 channels, 3×u32 dims, f32 voxel size,
//! 3×f32 origin, then f32 values channel-major, then x, y, z.

use std::path::Path;

use crate::error::{OccError, Result};
use crate::grid::{FeatureVolume, GridSpec, OccupancyGrid};
use crate::Point3;

use super::write_atomic;

const GRID_MAGIC: &[u8; 4] = b"WOCC";
const FEATURE_MAGIC: &[u8; 4] = b"WFEA";
const VERSION: u16 = 1;
pub const GRID_HEADER_LEN: usize = 34;

/// f32 header fields are widened through their shortest decimal form, so a
/// spec written from decimal values (0.2, -10, ...) reads back unchanged.
fn widen(v: f32) -> f64 {
    v.to_string().parse().expect("f32 display parses")
}

fn put_spec(out: &mut Vec<u8>, spec: &GridSpec) {
    for d in spec.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(spec.voxel_size as f32).to_le_bytes());
    for a in 0..3 {
        out.extend_from_slice(&(spec.origin[a] as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(OccError::Format(format!(
                "truncated file: need {end} bytes, have {}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return Err(OccError::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u16()?;
        if v != VERSION {
            return Err(OccError::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn spec(&mut self) -> Result<GridSpec> {
        let dims = [self.u32()? as usize, self.u32()? as usize, self.u32()? as usize];
        let size = widen(self.f32()?);
        let origin = Point3::new(widen(self.f32()?), widen(self.f32()?), widen(self.f32()?));
        GridSpec::new(origin, dims, size).map_err(|e| OccError::Format(format!("bad grid header: {e}")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(OccError::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_grid(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(GRID_HEADER_LEN + grid.labels().len());
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_spec(&mut out, grid.spec());
    out.extend_from_slice(grid.labels());
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<OccupancyGrid> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(GRID_MAGIC)?;
    let spec = r.spec()?;
    let labels = r.take(spec.num_voxels())?.to_vec();
    r.finish()?;
    OccupancyGrid::from_labels(spec, labels)
}

pub fn write_grid(path: &Path, grid: &OccupancyGrid) -> Result<()> {
    write_atomic(path, &encode_grid(grid))
}

pub fn read_grid(path: &Path) -> Result<OccupancyGrid> {
    decode_grid(&super::read_bytes(path)?).map_err(|e| match e {
        OccError::Format(reason) => OccError::Format(format!("{}: {reason}", path.display())),
        other => other,
    })
}

pub fn encode_features(v: &FeatureVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(38 + 4 * v.data().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(v.channels() as u32).to_le_bytes());
    put_spec(&mut out, v.spec());
    for x in v.data() {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureVolume> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(FEATURE_MAGIC)?;
    let channels = r.u32()? as usize;
    let spec = r.spec()?;
    let n = channels * spec.num_voxels();
    let data: Vec<f64> = r
        .take(4 * n)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    r.finish()?;
    FeatureVolume::from_data(spec, channels, data)
}

pub fn write_features(path: &Path, v: &FeatureVolume) -> Result<()> {
    write_atomic(path, &encode_features(v))
}

pub fn read_features(path: &Path) -> Result<FeatureVolume> {
    decode_features(&super::read_bytes(path)?)
}

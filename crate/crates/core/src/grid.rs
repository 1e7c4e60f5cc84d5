//! Voxel lattice geometry and the dense volumes bound to it.

use crate::error::{OccError, Result};
use crate::Point3;

/// Class id of an empty voxel.
pub const EMPTY: u8 = 0;
/// Class id of noise / ignore.
pub const NOISE: u8 = 255;

/// Voxel lattice: `dims` cells of edge `voxel_size`, cell `(0,0,0)` has its
/// min corner at `origin`. Axis order is X=i (forward), Y=j (left), Z=k (up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point3,
    pub dims: [usize; 3],
    pub voxel_size: f64,
}

impl Default for GridSpec {
    /// 100×100×40 cells of 0.2 m covering X∈[0,20], Y∈[-10,10], Z∈[-2,6].
    fn default() -> Self {
        Self {
            origin: Point3::new(0.0, -10.0, -2.0),
            dims: [100, 100, 40],
            voxel_size: 0.2,
        }
    }
}

impl GridSpec {
    pub fn new(origin: Point3, dims: [usize; 3], voxel_size: f64) -> Result<Self> {
        let spec = Self {
            origin,
            dims,
            voxel_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(OccError::Precondition(format!(
                "grid dims must be positive, got {:?}",
                self.dims
            )));
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(OccError::Precondition(format!(
                "voxel size must be positive, got {}",
                self.voxel_size
            )));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(OccError::Precondition("non-finite grid origin".into()));
        }
        Ok(())
    }

    pub fn num_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Linear offset with `i` slowest and `k` fastest.
    #[inline]
    pub fn linear(&self, [i, j, k]: [usize; 3]) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn unlinear(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        [i, j, k]
    }

    pub fn contains_index(&self, index: [usize; 3]) -> bool {
        index.iter().zip(self.dims.iter()).all(|(&a, &n)| a < n)
    }

    /// Max corner of the whole lattice.
    pub fn max_corner(&self) -> Point3 {
        Point3::new(
            self.origin.x + self.dims[0] as f64 * self.voxel_size,
            self.origin.y + self.dims[1] as f64 * self.voxel_size,
            self.origin.z + self.dims[2] as f64 * self.voxel_size,
        )
    }

    pub fn voxel_center(&self, index: [usize; 3]) -> Result<Point3> {
        if !self.contains_index(index) {
            return Err(OccError::OutOfRange {
                index,
                dims: self.dims,
            });
        }
        Ok(self.voxel_center_unchecked(index))
    }

    #[inline]
    pub(crate) fn voxel_center_unchecked(&self, [i, j, k]: [usize; 3]) -> Point3 {
        let s = self.voxel_size;
        Point3::new(
            self.origin.x + (i as f64 + 0.5) * s,
            self.origin.y + (j as f64 + 0.5) * s,
            self.origin.z + (k as f64 + 0.5) * s,
        )
    }

    /// Closed box `[min, max]` of a voxel.
    pub fn voxel_bounds(&self, [i, j, k]: [usize; 3]) -> (Point3, Point3) {
        let s = self.voxel_size;
        let min = Point3::new(
            self.origin.x + i as f64 * s,
            self.origin.y + j as f64 * s,
            self.origin.z + k as f64 * s,
        );
        (min, min + nalgebra::Vector3::repeat(s))
    }

    /// Cell owning `p` under half-open `[lo, hi)` ownership, or `None` outside
    /// the lattice.
    pub fn voxel_of(&self, p: &Point3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            out[a] = f as usize;
        }
        Some(out)
    }

    /// Signed (possibly out-of-range) cell coordinates of `p`.
    pub fn signed_voxel_of(&self, p: &Point3) -> [i64; 3] {
        let mut out = [0i64; 3];
        for a in 0..3 {
            out[a] = ((p[a] - self.origin[a]) / self.voxel_size).floor() as i64;
        }
        out
    }

    pub fn indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.num_voxels()).map(move |l| self.unlinear(l))
    }
}

/// `voxel_center` as a free function.
pub fn voxel_center(spec: &GridSpec, index: [usize; 3]) -> Result<Point3> {
    spec.voxel_center(index)
}

/// Dense per-voxel class ids. `0` is empty, `255` is noise, `1..=N` are classes.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    labels: Vec<u8>,
}

impl OccupancyGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            labels: vec![EMPTY; spec.num_voxels()],
            spec,
        }
    }

    pub fn from_labels(spec: GridSpec, labels: Vec<u8>) -> Result<Self> {
        spec.validate()?;
        if labels.len() != spec.num_voxels() {
            return Err(OccError::IncompatibleGrid(format!(
                "label buffer has {} entries, grid has {}",
                labels.len(),
                spec.num_voxels()
            )));
        }
        Ok(Self { spec, labels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, index: [usize; 3]) -> u8 {
        self.labels[self.spec.linear(index)]
    }

    pub fn set(&mut self, index: [usize; 3], label: u8) {
        let l = self.spec.linear(index);
        self.labels[l] = label;
    }

    pub fn is_occupied(&self, index: [usize; 3]) -> bool {
        self.get(index) != EMPTY
    }

    /// Number of voxels that are neither empty nor noise.
    pub fn occupied_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != EMPTY && l != NOISE).count()
    }

    /// Checks every label is empty, noise or a class of `map`.
    pub fn validate(&self, map: &LabelMap) -> Result<()> {
        let n = map.num_classes() as u8;
        if let Some(bad) = self.labels.iter().find(|&&l| l != NOISE && l > n) {
            return Err(OccError::Precondition(format!(
                "label {bad} is not in the label map (N = {n})"
            )));
        }
        Ok(())
    }
}

/// `C × nx × ny × nz` real tensor bound to a lattice. Channel-major, then
/// `i`, `j`, `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    spec: GridSpec,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureVolume {
    pub fn zeros(spec: GridSpec, channels: usize) -> Self {
        Self {
            data: vec![0.0; channels * spec.num_voxels()],
            spec,
            channels,
        }
    }

    pub fn from_data(spec: GridSpec, channels: usize, data: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if channels == 0 {
            return Err(OccError::IncompatibleShape("channel count must be positive".into()));
        }
        if data.len() != channels * spec.num_voxels() {
            return Err(OccError::IncompatibleShape(format!(
                "data has {} values, expected {}×{} = {}",
                data.len(),
                channels,
                spec.num_voxels(),
                channels * spec.num_voxels()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(OccError::IncompatibleShape("non-finite feature value".into()));
        }
        Ok(Self {
            spec,
            channels,
            data,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn num_voxels(&self) -> usize {
        self.spec.num_voxels()
    }

    #[inline]
    pub fn offset(&self, channel: usize, voxel: usize) -> usize {
        channel * self.spec.num_voxels() + voxel
    }

    pub fn get(&self, channel: usize, index: [usize; 3]) -> f64 {
        self.data[self.offset(channel, self.spec.linear(index))]
    }

    pub fn set(&mut self, channel: usize, index: [usize; 3], value: f64) {
        let o = self.offset(channel, self.spec.linear(index));
        self.data[o] = value;
    }

    /// Feature vector of one voxel (strided gather).
    pub fn vector(&self, voxel: usize) -> Vec<f64> {
        (0..self.channels)
            .map(|c| self.data[self.offset(c, voxel)])
            .collect()
    }

    pub fn same_shape(&self, other: &FeatureVolume) -> bool {
        self.spec == other.spec && self.channels == other.channels
    }
}

/// Ordered class table with contiguous ids from 1 and the subset counted as
/// ground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    classes: Vec<(u8, String)>,
    ground: Vec<u8>,
}

impl Default for LabelMap {
    fn default() -> Self {
        let names = ["grass", "tree", "bush", "puddle", "mud", "barrier", "rubble"];
        Self::new(&names, &["grass", "puddle", "mud", "rubble"]).expect("default label map")
    }
}

impl LabelMap {
    /// Classes get ids `1..=names.len()` in order.
    pub fn new(names: &[&str], ground: &[&str]) -> Result<Self> {
        if names.is_empty() || names.len() > 254 {
            return Err(OccError::Config(format!(
                "label map needs 1..=254 classes, got {}",
                names.len()
            )));
        }
        let classes: Vec<(u8, String)> = names
            .iter()
            .enumerate()
            .map(|(i, n)| ((i + 1) as u8, n.to_string()))
            .collect();
        for (i, (_, n)) in classes.iter().enumerate() {
            if classes[..i].iter().any(|(_, m)| m == n) {
                return Err(OccError::Config(format!("duplicate class name '{n}'")));
            }
        }
        let mut map = Self {
            classes,
            ground: Vec::new(),
        };
        for g in ground {
            let id = map
                .id_of(g)
                .ok_or_else(|| OccError::Config(format!("unknown ground class '{g}'")))?;
            if !map.ground.contains(&id) {
                map.ground.push(id);
            }
        }
        map.ground.sort_unstable();
        Ok(map)
    }

    pub fn with_ground(mut self, ground: &[&str]) -> Result<Self> {
        let names: Vec<String> = self.classes.iter().map(|(_, n)| n.clone()).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        self = Self::new(&names, ground)?;
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[(u8, String)] {
        &self.classes
    }

    pub fn ground_classes(&self) -> &[u8] {
        &self.ground
    }

    pub fn is_ground(&self, id: u8) -> bool {
        self.ground.contains(&id)
    }

    pub fn contains(&self, id: u8) -> bool {
        id >= 1 && (id as usize) <= self.classes.len()
    }

    pub fn id_of(&self, name: &str) -> Option<u8> {
        self.classes.iter().find(|(_, n)| n == name).map(|(i, _)| *i)
    }

    pub fn name_of(&self, id: u8) -> Option<&str> {
        self.classes
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, n)| n.as_str())
    }
}

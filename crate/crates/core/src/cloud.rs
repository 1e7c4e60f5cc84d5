use crate::error::{OccError, Result};
use crate::grid::{LabelMap, NOISE};
use crate::pose::RigidPose;
use crate::Point3;

/// Labeled point cloud. All per-point columns have the same length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemanticPointCloud {
    points: Vec<Point3>,
    labels: Vec<u8>,
    intensity: Option<Vec<f32>>,
    frame_id: Option<Vec<u32>>,
}

impl SemanticPointCloud {
    pub fn new(points: Vec<Point3>, labels: Vec<u8>) -> Result<Self> {
        Self::with_columns(points, labels, None, None)
    }

    pub fn with_columns(
        points: Vec<Point3>,
        labels: Vec<u8>,
        intensity: Option<Vec<f32>>,
        frame_id: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = points.len();
        if labels.len() != n {
            return Err(OccError::Pairing(format!(
                "{} points but {} labels",
                n,
                labels.len()
            )));
        }
        if intensity.as_ref().is_some_and(|v| v.len() != n) {
            return Err(OccError::Pairing("intensity column length mismatch".into()));
        }
        if frame_id.as_ref().is_some_and(|v| v.len() != n) {
            return Err(OccError::Pairing("frame id column length mismatch".into()));
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(OccError::Precondition("non-finite point coordinate".into()));
        }
        Ok(Self {
            points,
            labels,
            intensity,
            frame_id,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        self.intensity.as_deref()
    }

    pub fn frame_ids(&self) -> Option<&[u32]> {
        self.frame_id.as_deref()
    }

    pub fn frame_id(&self, i: usize) -> Option<u32> {
        self.frame_id.as_ref().map(|f| f[i])
    }

    /// Sets every point's frame id.
    pub fn with_frame_id(mut self, id: u32) -> Self {
        self.frame_id = Some(vec![id; self.points.len()]);
        self
    }

    /// Checks every label is a class of `map` or noise.
    pub fn validate(&self, map: &LabelMap) -> Result<()> {
        match self.labels.iter().find(|&&l| l != NOISE && !map.contains(l)) {
            Some(l) => Err(OccError::Precondition(format!(
                "point label {l} not in label map"
            ))),
            None => Ok(()),
        }
    }

    pub fn transformed(&self, pose: &RigidPose) -> Self {
        Self {
            points: self.points.iter().map(|p| pose.apply(p)).collect(),
            labels: self.labels.clone(),
            intensity: self.intensity.clone(),
            frame_id: self.frame_id.clone(),
        }
    }

    /// Keeps the points whose label satisfies `keep`, in order.
    pub fn filter_labels(&self, keep: impl Fn(u8) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.labels[i])).collect();
        self.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| idx.iter().map(|&i| v[i]).collect()),
            frame_id: self
                .frame_id
                .as_ref()
                .map(|v| idx.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Concatenates in order. Optional columns survive only if every part has them.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a SemanticPointCloud>) -> Self {
        let parts: Vec<&SemanticPointCloud> = parts.into_iter().collect();
        let all_int = !parts.is_empty() && parts.iter().all(|p| p.intensity.is_some());
        let all_fid = !parts.is_empty() && parts.iter().all(|p| p.frame_id.is_some());
        let mut out = Self::default();
        if all_int {
            out.intensity = Some(Vec::new());
        }
        if all_fid {
            out.frame_id = Some(Vec::new());
        }
        for p in parts {
            out.points.extend_from_slice(&p.points);
            out.labels.extend_from_slice(&p.labels);
            if let (Some(dst), Some(src)) = (out.intensity.as_mut(), p.intensity.as_ref()) {
                dst.extend_from_slice(src);
            }
            if let (Some(dst), Some(src)) = (out.frame_id.as_mut(), p.frame_id.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        out
    }
}

//! Semantic labeling of occupied voxels by k-nearest-neighbor majority vote.

use rayon::prelude::*;

use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result};
use crate::grid::{LabelMap, OccupancyGrid, EMPTY, NOISE};
use crate::spatial::{KdTree, Neighbor};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    /// Neighbors farther than this do not vote. Unlimited when `None`.
    pub max_radius: Option<f64>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 15,
            max_radius: None,
        }
    }
}

/// Labeled points indexed for exact k-NN queries.
#[derive(Debug)]
pub struct SpatialIndex {
    tree: KdTree,
    labels: Vec<u8>,
}

/// Indexes every point of `cloud`.
pub fn build_index(cloud: &SemanticPointCloud) -> Result<SpatialIndex> {
    Ok(SpatialIndex {
        tree: KdTree::build(cloud.points())?,
        labels: cloud.labels().to_vec(),
    })
}

impl SpatialIndex {
    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn knn(&self, query: &Point3, k: usize) -> Vec<Neighbor> {
        self.tree.knn(query, k)
    }

    pub fn knn_within(&self, query: &Point3, k: usize, max_radius: Option<f64>) -> Vec<Neighbor> {
        self.tree.knn_within(query, k, max_radius.unwrap_or(f64::INFINITY))
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }
}

/// Modal class of the neighbors, ties broken by the smaller summed distance
/// of each tied class's neighbors, then by the smaller class id. Neighbors
/// are expected closest first. `None` when there are no neighbors.
pub fn vote(neighbors: &[(u8, f64)]) -> Option<u8> {
    let mut tally: Vec<(u8, usize, f64)> = Vec::new();
    for &(label, dist) in neighbors {
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => {
                t.1 += 1;
                t.2 += dist;
            }
            None => tally.push((label, 1, dist)),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then(a.2.total_cmp(&b.2))
                .then(a.0.cmp(&b.0))
        })
        .map(|t| t.0)
}

/// Labels each occupied voxel of `occ` by the `cfg.k` nearest non-noise
/// points to its center. Empty voxels stay empty; occupied voxels with no
/// voter (all noise, or none within `max_radius`) become noise.
pub fn knn_label(
    occ: &OccupancyGrid,
    cloud: &SemanticPointCloud,
    cfg: &KnnConfig,
    labels: &LabelMap,
) -> Result<OccupancyGrid> {
    if cloud.is_empty() {
        return Err(OccError::InsufficientPoints { needed: 1, got: 0 });
    }
    if cfg.k == 0 {
        return Err(OccError::Precondition("k must be at least 1".into()));
    }
    cloud.validate(labels)?;
    let voters = cloud.filter_labels(|l| l != NOISE);
    let spec = *occ.spec();
    let index = if voters.is_empty() {
        None
    } else {
        Some(build_index(&voters)?)
    };

    let out: Vec<u8> = occ
        .labels()
        .par_iter()
        .enumerate()
        .map(|(l, &state)| {
            if state == EMPTY {
                return EMPTY;
            }
            let Some(index) = index.as_ref() else {
                return NOISE;
            };
            let center = spec.voxel_center_unchecked(spec.unlinear(l));
            let nbrs: Vec<(u8, f64)> = index
                .knn_within(&center, cfg.k, cfg.max_radius)
                .iter()
                .map(|n| (index.label(n.index), n.distance))
                .collect();
            vote(&nbrs).unwrap_or(NOISE)
        })
        .collect();
    OccupancyGrid::from_labels(spec, out)
}

use std::collections::HashMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::OrientedPointSet;
use crate::cloud::SemanticPointCloud;
use crate::error::{OccError, Result};
use crate::spatial::KdTree;
use crate::Point3;

/// PCA normals from the `k_n` nearest neighbors (the point included), flipped
/// to face the sensor that observed the point. Points without a frame id are
/// looked up as frame 0.
pub fn estimate_normals(
    cloud: &SemanticPointCloud,
    k_n: usize,
    sensor_origins: &HashMap<u32, Point3>,
) -> Result<OrientedPointSet> {
    if k_n < 3 {
        return Err(OccError::Precondition(format!("k_n must be at least 3, got {k_n}")));
    }
    if cloud.len() < k_n {
        return Err(OccError::InsufficientPoints {
            needed: k_n,
            got: cloud.len(),
        });
    }
    let origins: Vec<Point3> = (0..cloud.len())
        .map(|i| {
            let f = cloud.frame_id(i).unwrap_or(0);
            sensor_origins.get(&f).copied().ok_or_else(|| {
                OccError::Precondition(format!("no sensor origin for frame {f}"))
            })
        })
        .collect::<Result<_>>()?;

    let tree = KdTree::build(cloud.points())?;
    let points = cloud.points();
    let normals: Vec<Vector3<f64>> = points
        .par_iter()
        .zip(origins.par_iter())
        .map(|(p, sensor)| {
            let nbrs = tree.knn(p, k_n);
            let n = nbrs.len() as f64;
            let mean = nbrs
                .iter()
                .fold(Vector3::zeros(), |acc, nb| acc + points[nb.index].coords)
                / n;
            let mut cov = Matrix3::zeros();
            for nb in &nbrs {
                let d = points[nb.index].coords - mean;
                cov += d * d.transpose();
            }
            cov /= n;
            let eig = SymmetricEigen::new(cov);
            let min = eig.eigenvalues.imin();
            let mut normal: Vector3<f64> = eig.eigenvectors.column(min).into();
            normal.normalize_mut();
            if normal.dot(&(sensor - p)) < 0.0 {
                normal = -normal;
            }
            normal
        })
        .collect();
    OrientedPointSet::new(points.to_vec(), normals)
}

//! Rigid transforms in homogeneous form.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};

use crate::error::{OccError, Result};
use crate::Point3;

/// Tolerance on `RᵀR = I` and `det R = 1` accepted by [`RigidPose::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// A 4×4 rigid transform `[R t; 0 1]`, translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    matrix: Matrix4<f64>,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    /// Validates the bottom row and the orthonormality of the rotation block.
    pub fn new(matrix: Matrix4<f64>) -> Result<Self> {
        Self::with_tolerance(matrix, ORTHONORMAL_TOL)
    }

    pub fn with_tolerance(matrix: Matrix4<f64>, tol: f64) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(OccError::InvalidPose("non-finite entry".into()));
        }
        let bottom = matrix.fixed_view::<1, 4>(3, 0);
        if bottom[(0, 0)] != 0.0 || bottom[(0, 1)] != 0.0 || bottom[(0, 2)] != 0.0 || bottom[(0, 3)] != 1.0
        {
            return Err(OccError::InvalidPose(format!(
                "bottom row must be [0 0 0 1], got {bottom}"
            )));
        }
        let r: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > tol {
            return Err(OccError::InvalidPose(format!(
                "rotation block not orthonormal (max |RᵀR - I| = {err:.3e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > tol {
            return Err(OccError::InvalidPose(format!("det R = {det}, expected +1")));
        }
        Ok(Self { matrix })
    }

    /// Builds from a row-major 3×4 `[R | t]` block.
    pub fn from_rows_3x4(rows: &[f64; 12]) -> Result<Self> {
        Self::new(matrix_from_3x4(rows))
    }

    pub fn identity() -> Self {
        Self {
            matrix: Matrix4::identity(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            matrix: Matrix4::new_translation(&t),
        }
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        let mut matrix = rotation.to_homogeneous();
        matrix.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self { matrix }
    }

    /// Rotation about +z by `yaw` radians followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        Self::from_parts(Rotation3::from_axis_angle(&Vector3::z_axis(), yaw), translation)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.matrix.fixed_view::<3, 3>(0, 0).into()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.matrix.fixed_view::<3, 1>(0, 3).into()
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation() * p.coords + self.translation())
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            matrix: self.matrix * other.matrix,
        }
    }

    /// Closed-form inverse `[Rᵀ, -Rᵀt]`.
    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        let mut matrix = Matrix4::identity();
        matrix.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        matrix.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        RigidPose { matrix }
    }

    /// Row-major 3×4 `[R | t]`, the KITTI pose line layout.
    pub fn to_rows_3x4(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                out[r * 4 + c] = self.matrix[(r, c)];
            }
        }
        out
    }
}

pub(crate) fn matrix_from_3x4(rows: &[f64; 12]) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    for r in 0..3 {
        for c in 0..4 {
            m[(r, c)] = rows[r * 4 + c];
        }
    }
    m
}

/// Nearest rotation in the Frobenius sense (polar factor `U Vᵀ`), with the
/// reflection case folded back to `det = +1`.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * v_t;
    }
    r
}

pub fn pose_apply(pose: &RigidPose, p: &Point3) -> Point3 {
    pose.apply(p)
}

pub fn pose_compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

pub fn pose_invert(a: &RigidPose) -> RigidPose {
    a.inverse()
}

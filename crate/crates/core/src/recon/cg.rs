//! Conjugate gradient for symmetric positive definite operators.

use crate::error::{OccError, Result};

/// `y = A x` for a symmetric positive definite `A`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub iterations: usize,
    /// `‖r‖ / ‖b‖` after each iteration, starting with the initial residual.
    pub residual_history: Vec<f64>,
}

impl CgReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

// Sequential so results do not depend on the thread pool size.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0` until the relative residual drops below
/// `tol` or `max_iters` is reached.
pub fn conjugate_gradient(
    op: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = op.dim();
    assert_eq!(b.len(), n, "rhs length must match operator dimension");
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    let mut report = CgReport {
        iterations: 0,
        residual_history: vec![if b_norm > 0.0 { 1.0 } else { 0.0 }],
    };
    if b_norm == 0.0 {
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(OccError::SolverNotConverged {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        report.iterations = it;
        report.residual_history.push(rel);
        if rel <= tol {
            return Ok((x, report));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(OccError::SolverNotConverged {
        iterations: max_iters,
        residual: report.final_residual(),
    })
}

//! Primal active-set method for small strictly convex QPs
//!
//! ```text
//! minimize ½ pᵀHp + gᵀp   subject to  E p = 0,  G p <= h
//! ```
//!
//! started from the feasible point `p = 0` (so `h >= 0` is required).

use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};
use crate::linalg::{self, solve_kkt};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub p: DVector<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
}

pub fn solve(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    eq: &DMatrix<f64>,
    ineq: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<QpSolution> {
    let n = h.nrows();
    if rhs.iter().any(|&v| v < 0.0) {
        return Err(DfmError::InvalidArgument("p = 0 must be feasible for the QP".into()));
    }
    let eq = linalg::row_space(eq);
    let mut p = DVector::zeros(n);
    let mut active: Vec<usize> = Vec::new();
    let cap = 50 * (ineq.nrows() + 1);
    for iteration in 0..cap {
        let mut c = DMatrix::zeros(eq.nrows() + active.len(), n);
        c.view_mut((0, 0), (eq.nrows(), n)).copy_from(&eq);
        for (k, &i) in active.iter().enumerate() {
            c.set_row(eq.nrows() + k, &ineq.row(i));
        }
        let grad = h * &p + g;
        let (d, mu) = solve_kkt(h, &c, &(-&grad), &DVector::zeros(c.nrows()), 0.0)?;
        let scale = 1.0 + linalg::max_abs(&p);
        if linalg::max_abs(&d) <= 1e-13 * scale {
            let most_negative = active
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, mu[eq.nrows() + k]))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match most_negative {
                Some((i, lambda)) if lambda < -1e-12 => {
                    active.retain(|&a| a != i);
                    continue;
                }
                _ => {
                    return Ok(QpSolution {
                        p,
                        active,
                        iterations: iteration,
                    })
                }
            }
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..ineq.nrows() {
            if active.contains(&i) {
                continue;
            }
            let slope = ineq.row(i).dot(&d.transpose());
            if slope > 0.0 {
                let room = (rhs[i] - ineq.row(i).dot(&p.transpose())).max(0.0);
                let step = room / slope;
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        p.axpy(alpha, &d, 1.0);
        if let Some(i) = blocking {
            active.push(i);
        }
    }
    Err(DfmError::InvalidArgument("active-set QP did not terminate".into()))
}

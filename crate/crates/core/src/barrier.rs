//! Inverse-barrier calculus: `B(x) = Σ_j 1 / (-g_j(x))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};
use crate::model::{Constraint, NodeLocal};

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

fn checked_value(g: &Constraint, x: &DVector<f64>, j: usize) -> Result<f64> {
    let v = g.value(x);
    if v < 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(DfmError::BarrierUndefined {
            node: 0,
            constraint: j,
            value: v,
        })
    }
}

/// Barrier value only; cheaper than [`barrier_eval`].
pub fn barrier_value(node: &NodeLocal, x: &DVector<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (j, g) in node.constraints.iter().enumerate() {
        total += 1.0 / -checked_value(g, x, j)?;
    }
    Ok(total)
}

/// Value, gradient and Hessian of one constraint's barrier term.
pub fn barrier_term(g: &Constraint, x: &DVector<f64>) -> Result<BarrierEval> {
    let v = checked_value(g, x, 0)?;
    Ok(barrier_term_with_value(g, x, v))
}

/// Barrier term at `x` given the constraint value `v = g(x) < 0`, for callers
/// that track `v` more accurately than a fresh evaluation would.
pub(crate) fn barrier_term_with_value(g: &Constraint, x: &DVector<f64>, v: f64) -> BarrierEval {
    let grad_g = g.gradient(x);
    let v2 = v * v;
    let mut hessian = &grad_g * grad_g.transpose() * (-2.0 / (v2 * v));
    if let Some(h) = g.hessian(x) {
        hessian += h / v2;
    }
    BarrierEval {
        value: -1.0 / v,
        gradient: grad_g / v2,
        hessian,
    }
}

/// Sum of the barrier terms of all local constraints. Zero when the node has none.
pub fn barrier_eval(node: &NodeLocal, x: &DVector<f64>) -> Result<BarrierEval> {
    let d = x.len();
    let mut out = BarrierEval {
        value: 0.0,
        gradient: DVector::zeros(d),
        hessian: DMatrix::zeros(d, d),
    };
    for (j, g) in node.constraints.iter().enumerate() {
        let t = barrier_term(g, x).map_err(|e| match e {
            DfmError::BarrierUndefined { value, .. } => DfmError::BarrierUndefined {
                node: 0,
                constraint: j,
                value,
            },
            other => other,
        })?;
        out.value += t.value;
        out.gradient += t.gradient;
        out.hessian += t.hessian;
    }
    Ok(out)
}

/// Smoothness constant of the barrier on the sublevel set,
/// `L_B = (4 β₁² M³ + 2 β M²) q_max` with `M = gap / ρ`.
///
/// `β = 0` is accepted so that affine constraints can be handled.
pub fn smoothness_constant_lb(gap: f64, rho: f64, beta: f64, beta1: f64, q_max: usize) -> Result<f64> {
    if !(gap > 0.0) || !(rho > 0.0) || !(beta >= 0.0) || !(beta1 >= 0.0) || q_max == 0 {
        return Err(DfmError::InvalidArgument(format!(
            "L_B needs gap > 0, rho > 0, beta >= 0, beta1 >= 0, q_max >= 1 (got {gap}, {rho}, {beta}, {beta1}, {q_max})"
        )));
    }
    if beta == 0.0 && beta1 == 0.0 {
        return Err(DfmError::InvalidArgument("beta and beta1 cannot both be zero".into()));
    }
    let m = gap / rho;
    Ok((4.0 * beta1 * beta1 * m.powi(3) + 2.0 * beta * m * m) * q_max as f64)
}

/// Both sides of the local smoothness inequality for one barrier term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BregmanCheck {
    /// `B(y) - B(x) - ⟨∇B(x), y - x⟩`.
    pub lhs: f64,
    /// `‖∇B(y) - ∇B(x)‖² / (8 β₁² M³ + 4 β M²)`.
    pub rhs: f64,
}

impl BregmanCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs + slack >= self.rhs
    }
}

/// Evaluates the local smoothness inequality of constraint `j` between `x`
/// and `y`, both inside the sublevel set `{B_j <= m}`.
pub fn local_smoothness_residual(
    node: &NodeLocal,
    j: usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
    m: f64,
    beta: f64,
    beta1: f64,
) -> Result<BregmanCheck> {
    let g = node
        .constraints
        .get(j)
        .ok_or_else(|| DfmError::InvalidArgument(format!("constraint index {j} out of range")))?;
    let bx = barrier_term(g, x)?;
    let by = barrier_term(g, y)?;
    // Tiny relative slack so a pair sitting exactly on the level set is accepted.
    let cap = m * (1.0 + 1e-12);
    if bx.value > cap || by.value > cap {
        return Err(DfmError::InvalidArgument(format!(
            "sublevel bound violated: B(x) = {}, B(y) = {}, M = {m}",
            bx.value, by.value
        )));
    }
    let denom = 8.0 * beta1 * beta1 * m.powi(3) + 4.0 * beta * m * m;
    if !(denom > 0.0) {
        return Err(DfmError::InvalidArgument("denominator 8β₁²M³ + 4βM² must be positive".into()));
    }
    let lhs = by.value - bx.value - bx.gradient.dot(&(y - x));
    let rhs = (&by.gradient - &bx.gradient).norm_squared() / denom;
    Ok(BregmanCheck { lhs, rhs })
}

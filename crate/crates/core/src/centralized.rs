//! Centralized damped Newton solver for the barrier problem
//! `min f(x) + ρ B(x)` subject to `A x = c`, used to produce reference
//! optima for comparisons and diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::barrier;
use crate::error::{DfmError, Result};
use crate::linalg::{self, solve_kkt};
use crate::local_solver::fraction_to_boundary;
use crate::model::problem::with_node;
use crate::model::{evaluate_objective, Allocation, ObjectiveValue, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralizedOptions {
    /// Stop when half the squared Newton decrement falls below this.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for CentralizedOptions {
    fn default() -> Self {
        CentralizedOptions {
            tol: 1e-14,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub x: Allocation,
    pub objective: ObjectiveValue,
    pub iterations: usize,
    /// Half the squared Newton decrement at the returned point.
    pub gap_estimate: f64,
}

/// Minimizes `f + ρ B` with `ρ = rho` from the strictly feasible `x0`.
///
/// Indefinite cost Hessian blocks are shifted to positive definite, so on
/// nonconvex instances the result is a local minimizer.
pub fn solve_barrier_problem(
    spec: &ProblemSpec,
    rho: f64,
    x0: &Allocation,
    options: &CentralizedOptions,
) -> Result<CentralizedSolution> {
    if !(rho >= 0.0) {
        return Err(DfmError::InvalidArgument(format!("barrier weight {rho} is negative")));
    }
    if !x0.is_interior() && spec.has_barriers() {
        return Err(DfmError::InfeasibleStart("reference solve needs a strictly interior start".into()));
    }
    let spec = spec.clone().with_rho(rho);
    let eq = linalg::row_space(&spec.coupling_matrix());
    let offsets = spec.offsets();
    let mut x = x0.stacked();
    let mut value = evaluate_objective(&spec, x0)?.total;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let (grad, hess) = derivatives(&spec, &offsets, &x)?;
        let (dx, _) = solve_kkt(&hess, &eq, &(-&grad), &DVector::zeros(eq.nrows()), 0.0)?;
        gap = 0.5 * dx.dot(&(&hess * &dx));
        if gap <= options.tol * (1.0 + value.abs()) {
            break;
        }
        let mut alpha: f64 = 1.0;
        for (node, &off) in spec.nodes.iter().zip(&offsets) {
            let xi = x.rows(off, node.dim).into_owned();
            let di = dx.rows(off, node.dim).into_owned();
            alpha = alpha.min(fraction_to_boundary(&node.constraints, &xi, &di, 0.99).usable);
        }
        let slope = grad.dot(&dx);
        let mut moved = false;
        while alpha > 1e-16 {
            let trial = &x + &dx * alpha;
            let candidate = Allocation::from_stacked(&spec, &trial)?;
            if let Ok(v) = evaluate_objective(&spec, &candidate) {
                if v.total <= value + 0.25 * alpha * slope {
                    x = trial;
                    value = v.total;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let x = Allocation::from_stacked(&spec, &x)?;
    let objective = evaluate_objective(&spec, &x)?;
    Ok(CentralizedSolution {
        x,
        objective,
        iterations,
        gap_estimate: gap,
    })
}

/// Follows the barrier path from `spec.rho` down to `final_rho`, dividing
/// the weight by ten at each stage. The final point approximates a
/// minimizer of `f` alone when `final_rho` is tiny.
pub fn barrier_path(spec: &ProblemSpec, x0: &Allocation, final_rho: f64) -> Result<CentralizedSolution> {
    let options = CentralizedOptions::default();
    let mut rho = spec.rho.max(final_rho);
    let mut sol = solve_barrier_problem(spec, rho, x0, &options)?;
    while rho > final_rho && spec.has_barriers() {
        rho = (rho * 0.1).max(final_rho);
        sol = solve_barrier_problem(spec, rho, &sol.x, &options)?;
    }
    Ok(sol)
}

fn derivatives(spec: &ProblemSpec, offsets: &[usize], x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = x.len();
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for (i, (node, &off)) in spec.nodes.iter().zip(offsets).enumerate() {
        let xi = x.rows(off, node.dim).into_owned();
        let mut g = node.cost.gradient(&xi);
        let mut h = node
            .cost
            .hessian(&xi)
            .unwrap_or_else(|| DMatrix::identity(node.dim, node.dim) * node.smoothness);
        h = (&h + h.transpose()) * 0.5;
        if let Some(&lowest) = linalg::symmetric_eigenvalues(&h).first() {
            if lowest < 0.0 {
                for k in 0..node.dim {
                    h[(k, k)] += 1e-8 - lowest;
                }
            }
        }
        if !node.constraints.is_empty() {
            let b = barrier::barrier_eval(node, &xi).map_err(|e| with_node(e, i))?;
            g += b.gradient * spec.rho;
            h += b.hessian * spec.rho;
        }
        grad.rows_mut(off, node.dim).copy_from(&g);
        hess.view_mut((off, off), (node.dim, node.dim)).copy_from(&h);
    }
    Ok((grad, hess))
}

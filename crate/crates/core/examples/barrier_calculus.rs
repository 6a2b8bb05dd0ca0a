//! Inverse barrier values, derivatives and the sublevel-set smoothness bound
//! for a node confined to the unit disk and the upper half-plane.
//!
//! Run with `cargo run --example barrier_calculus`.

use dfm::barrier::{barrier_eval, local_smoothness_residual, smoothness_constant_lb};
use dfm::model::{Constraint, Cost, NodeLocal};
use nalgebra::{DMatrix, DVector};

fn main() -> dfm::Result<()> {
    let disk = Constraint::Quadratic {
        q: DMatrix::identity(2, 2) * 2.0,
        normal: DVector::zeros(2),
        offset: -1.0,
    };
    let node = NodeLocal::new(
        Cost::half_squared_distance(&[0.0, 0.0]),
        DMatrix::identity(2, 2),
        vec![disk, Constraint::lower_bound(2, 1, 0.0)],
    )?;

    for p in [[0.0, 0.5], [0.5, 0.5], [0.0, 0.9], [0.0, 0.05]] {
        let x = DVector::from_row_slice(&p);
        let e = barrier_eval(&node, &x)?;
        println!(
            "x = {p:?}: B = {:.4}, grad = ({:+.3}, {:+.3}), Hessian diag = ({:.2}, {:.2})",
            e.value, e.gradient[0], e.gradient[1], e.hessian[(0, 0)], e.hessian[(1, 1)]
        );
    }

    // The disk constraint has Hessian 2I and gradient norm at most 2 on the disk.
    let (beta, beta1) = (2.0, 2.0);
    let x = DVector::from_row_slice(&[0.1, 0.4]);
    let y = DVector::from_row_slice(&[-0.2, 0.7]);
    for j in 0..2 {
        let level = 1.5 * barrier_eval(&node, &x)?.value.max(barrier_eval(&node, &y)?.value);
        let check = local_smoothness_residual(&node, j, &x, &y, level, beta, beta1)?;
        println!(
            "constraint {j}: Bregman gap {:.4e} >= {:.4e}: {}",
            check.lhs,
            check.rhs,
            check.holds(0.0)
        );
    }
    for rho in [1e-1, 1e-2, 1e-3] {
        println!(
            "rho {rho:.0e}: L_B on the level set of an optimality gap of 1 is {:.3e}",
            smoothness_constant_lb(1.0, rho, beta, beta1, 2)?
        );
    }
    Ok(())
}

use crate::barrier;
use crate::error::{DfmError, Result};
use crate::model::{Allocation, ProblemSpec};

/// Largest barrier weight that keeps the barrier optimum within `epsilon`
/// of the constrained optimum, given a strictly feasible reference point `x'`
/// and a lower bound `f̲ <= f*`.
pub fn rho_for_accuracy(epsilon: f64, f_at_xprime: f64, f_lower: f64, barrier_at_xprime: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(DfmError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(barrier_at_xprime > 0.0) {
        return Err(DfmError::InvalidArgument(format!(
            "barrier value at the reference point must be positive, got {barrier_at_xprime}"
        )));
    }
    let gap = f_at_xprime - f_lower;
    if !(gap >= 0.0) {
        return Err(DfmError::InvalidArgument(format!(
            "f(x') = {f_at_xprime} is below the lower bound {f_lower}"
        )));
    }
    if gap <= epsilon / 2.0 {
        Ok(epsilon / (2.0 * barrier_at_xprime))
    } else {
        Ok(epsilon * epsilon / (4.0 * gap * barrier_at_xprime))
    }
}

/// Barrier weight for `spec` from the reference point `x'` and `spec.f_lower`.
pub fn rho_for_spec(spec: &ProblemSpec, epsilon: f64, reference: &Allocation) -> Result<f64> {
    let f_lower = spec
        .f_lower
        .ok_or_else(|| DfmError::InvalidArgument("instance has no lower bound on the optimal value".into()))?;
    let mut f = 0.0;
    let mut b = 0.0;
    for (node, x) in spec.nodes.iter().zip(reference.blocks()) {
        f += node.cost.value(x);
        b += barrier::barrier_value(node, x)?;
    }
    rho_for_accuracy(epsilon, f, f_lower, b)
}

//! Strictly feasible starting points.

use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};
use crate::linalg::{self, solve_kkt};
use crate::model::{Allocation, Constraint, InstanceKind, ProblemSpec};

/// Finds a point with `Σ A_i x_i = c` and every local constraint strictly
/// negative.
///
/// Scalar box instances with unit coupling get a proportional fill and
/// rate-control instances an equal split of every link. Everything else goes
/// through a phase-one barrier method.
pub fn feasible_initialization(spec: &ProblemSpec) -> Result<Allocation> {
    if let Some(x) = proportional_fill(spec) {
        return accept(spec, x);
    }
    if spec.kind == InstanceKind::RateControl {
        if let Some(x) = equal_link_split(spec) {
            return accept(spec, x);
        }
    }
    phase_one(spec)
}

fn accept(spec: &ProblemSpec, stacked: DVector<f64>) -> Result<Allocation> {
    let x = Allocation::from_stacked(spec, &stacked)?;
    if x.is_feasible() {
        Ok(x)
    } else {
        Err(DfmError::NoStrictlyFeasiblePoint(format!(
            "candidate has residual {:.3e} and margin {:.3e}",
            x.residual_inf(),
            x.interior_margin()
        )))
    }
}

fn scalar_box(c: &[Constraint]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for g in c {
        match g {
            Constraint::Affine { normal, offset } if normal.len() == 1 && normal[0] != 0.0 => {
                let bound = -offset / normal[0];
                if normal[0] > 0.0 {
                    hi = hi.min(bound);
                } else {
                    lo = lo.max(bound);
                }
            }
            _ => return None,
        }
    }
    (lo.is_finite() && hi.is_finite() && lo < hi).then_some((lo, hi))
}

/// `x_i = lo_i + θ (hi_i - lo_i)` with one `θ` for every node.
fn proportional_fill(spec: &ProblemSpec) -> Option<DVector<f64>> {
    if spec.coupling_rows() != 1 {
        return None;
    }
    let mut boxes = Vec::with_capacity(spec.node_count());
    for node in &spec.nodes {
        if node.dim != 1 || node.coupling[(0, 0)] != 1.0 {
            return None;
        }
        boxes.push(scalar_box(&node.constraints)?);
    }
    let low: f64 = boxes.iter().map(|b| b.0).sum();
    let width: f64 = boxes.iter().map(|b| b.1 - b.0).sum();
    let theta = (spec.rhs[0] - low) / width;
    if !(theta > 0.0 && theta < 1.0) {
        return None;
    }
    Some(DVector::from_iterator(
        boxes.len(),
        boxes.iter().map(|(lo, hi)| lo + theta * (hi - lo)),
    ))
}

/// Each link is split evenly among its users and each rate sits at a tenth of
/// its smallest share.
fn equal_link_split(spec: &ProblemSpec) -> Option<DVector<f64>> {
    let links = spec.coupling_rows();
    let users: Vec<usize> = (0..links)
        .map(|l| {
            spec.nodes
                .iter()
                .filter(|n| n.coupling.row(l).iter().any(|&v| v != 0.0))
                .count()
        })
        .collect();
    let mut out = Vec::with_capacity(spec.total_dim());
    for node in &spec.nodes {
        if node.dim < 2 || node.coupling.column(0).iter().any(|&v| v != 0.0) {
            return None;
        }
        let mut shares = Vec::with_capacity(node.dim - 1);
        for k in 1..node.dim {
            let col = node.coupling.column(k);
            let link = col.iter().position(|&v| v == 1.0)?;
            if col.iter().filter(|&&v| v != 0.0).count() != 1 {
                return None;
            }
            shares.push(spec.rhs[link] / users[link] as f64);
        }
        let rate = 0.1 * shares.iter().copied().fold(f64::INFINITY, f64::min);
        out.push(rate);
        out.extend(shares);
    }
    Some(DVector::from_vec(out))
}

const PHASE_ONE_PROXIMAL: f64 = 1e-8;
const SLACK_FLOOR: f64 = -1.0;

/// Minimizes `t s - Σ log(s - g_j(x)) - log(s - SLACK_FLOOR)` over
/// `{A x = c}` for increasing `t` until the slack `s` is negative.
fn phase_one(spec: &ProblemSpec) -> Result<Allocation> {
    let a = spec.coupling_matrix();
    let n = spec.total_dim();
    let mut x = linalg::pinv(&a) * &spec.rhs;
    let scale = 1.0 + linalg::max_abs(&spec.rhs);
    if linalg::max_abs(&(&a * &x - &spec.rhs)) > 1e-9 * scale {
        return Err(DfmError::NoStrictlyFeasiblePoint(
            "the coupling equations have no solution".into(),
        ));
    }
    if spec.nodes.iter().all(|node| node.constraints.is_empty()) {
        return accept(spec, x);
    }
    let offsets = spec.offsets();
    let worst = |x: &DVector<f64>| -> f64 {
        spec.nodes
            .iter()
            .zip(&offsets)
            .map(|(node, &off)| node.margin(&x.rows(off, node.dim).into_owned()))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let eq_rows = linalg::row_space(&a);
    let mut eq = DMatrix::zeros(eq_rows.nrows(), n + 1);
    eq.view_mut((0, 0), (eq_rows.nrows(), n)).copy_from(&eq_rows);

    let mut s = worst(&x).max(0.0) + 1.0;
    let mut t = 1.0;
    for _outer in 0..60 {
        for _newton in 0..100 {
            let (value, grad, hess) = phase_one_model(spec, &offsets, &x, s, t);
            let (dz, _) = solve_kkt(&hess, &eq, &(-&grad), &DVector::zeros(eq.nrows()), 0.0)?;
            let decrement = -grad.dot(&dz);
            if decrement <= 1e-12 {
                break;
            }
            let mut alpha = 1.0;
            loop {
                let xt = &x + dz.rows(0, n) * alpha;
                let st = s + dz[n] * alpha;
                if st > SLACK_FLOOR && st > worst(&xt) {
                    let (vt, _, _) = phase_one_model(spec, &offsets, &xt, st, t);
                    if vt <= value - 0.25 * alpha * decrement {
                        x = xt;
                        s = st;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break;
                }
            }
            if alpha < 1e-16 {
                break;
            }
        }
        let margin = worst(&x);
        if margin < 0.0 && (margin < -1e-6 * scale || s <= SLACK_FLOOR + 1e-3) {
            return accept(spec, x);
        }
        t *= 10.0;
    }
    if worst(&x) < 0.0 {
        return accept(spec, x);
    }
    Err(DfmError::NoStrictlyFeasiblePoint(format!(
        "phase one stalled with worst constraint value {:.3e}",
        worst(&x)
    )))
}

fn phase_one_model(
    spec: &ProblemSpec,
    offsets: &[usize],
    x: &DVector<f64>,
    s: f64,
    t: f64,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let mut value = t * s;
    let mut grad = DVector::zeros(n + 1);
    let mut hess = DMatrix::zeros(n + 1, n + 1);
    grad[n] = t;

    let floor_gap = s - SLACK_FLOOR;
    value -= floor_gap.ln();
    grad[n] -= 1.0 / floor_gap;
    hess[(n, n)] += 1.0 / (floor_gap * floor_gap);

    for (node, &off) in spec.nodes.iter().zip(offsets) {
        let xi = x.rows(off, node.dim).into_owned();
        for g in &node.constraints {
            let u = s - g.value(&xi);
            let dg = g.gradient(&xi);
            let d2g = g.hessian(&xi).unwrap_or_else(|| DMatrix::zeros(node.dim, node.dim));
            value -= u.ln();
            grad[n] -= 1.0 / u;
            let u2 = u * u;
            hess[(n, n)] += 1.0 / u2;
            for a in 0..node.dim {
                grad[off + a] += dg[a] / u;
                hess[(off + a, n)] -= dg[a] / u2;
                hess[(n, off + a)] -= dg[a] / u2;
                for b in 0..node.dim {
                    hess[(off + a, off + b)] += dg[a] * dg[b] / u2 + d2g[(a, b)] / u;
                }
            }
        }
    }
    for k in 0..n {
        hess[(k, k)] += PHASE_ONE_PROXIMAL;
    }
    (value, grad, hess)
}

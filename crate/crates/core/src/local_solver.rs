//! Neighborhood subproblem: minimize the sum of quadratic surrogates plus
//! barrier terms over a closed neighborhood, keeping the coupling value fixed.
//!
//! The solver is a damped Newton method on the equality-constrained barrier
//! objective. Each iteration solves the KKT system exactly, caps the step
//! with a fraction-to-boundary rule and then backtracks until the Armijo
//! condition holds. It always starts from the zero plan, which is feasible.

use nalgebra::{DMatrix, DVector};

use crate::barrier;
use crate::error::{DfmError, Result};
use crate::linalg::{self, solve_kkt};
use crate::model::problem::with_node;
use crate::model::{Allocation, Constraint, ProblemSpec};

/// Diagonal regularization used when the neighborhood coupling rows are dependent.
pub const KKT_REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemOptions {
    /// Stationarity tolerance, relative to `1 + ‖∇φ‖∞` at the current point.
    pub tol: f64,
    pub max_iterations: usize,
    pub boundary_fraction: f64,
    pub armijo: f64,
}

impl Default for SubproblemOptions {
    fn default() -> Self {
        SubproblemOptions {
            tol: 1e-10,
            max_iterations: 100,
            boundary_fraction: 0.99,
            armijo: 0.25,
        }
    }
}

/// One owner's proposed changes for every member of its closed neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct ReallocationPlan {
    pub owner: usize,
    /// Closed neighborhood of the owner, ascending.
    pub members: Vec<usize>,
    /// `deltas[k]` is the change proposed for `members[k]`.
    pub deltas: Vec<DVector<f64>>,
    /// Multiplier of the coupling constraint at the solution.
    pub multiplier: DVector<f64>,
    /// Final stationarity measure `‖∇φ - Aᵀv‖∞`.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl ReallocationPlan {
    pub fn delta_for(&self, node: usize) -> Option<&DVector<f64>> {
        self.members.binary_search(&node).ok().map(|k| &self.deltas[k])
    }

    pub fn is_zero(&self) -> bool {
        self.deltas.iter().all(|d| d.iter().all(|&v| v == 0.0))
    }

    /// `Σ_j A_j p_j`.
    pub fn coupling_change(&self, spec: &ProblemSpec) -> DVector<f64> {
        let mut r = DVector::zeros(spec.coupling_rows());
        for (&j, d) in self.members.iter().zip(&self.deltas) {
            r += &spec.nodes[j].coupling * d;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub direction: DVector<f64>,
    /// Multiplier `w` of the KKT system `[H Aᵀ; A 0] [Δ; w] = [-g; -A p]`.
    pub multiplier: DVector<f64>,
    /// Newton decrement `sqrt(Δᵀ H Δ)`.
    pub decrement: f64,
}

/// Newton direction of the second-order model `g·Δ + ½ ΔᵀHΔ` subject to
/// `A (p + Δ) = 0`.
pub fn newton_kkt_step(
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    coupling: &DMatrix<f64>,
    p: &DVector<f64>,
    regularization: f64,
) -> Result<NewtonStep> {
    let r2 = -(coupling * p);
    let (direction, multiplier) = solve_kkt(hessian, coupling, &(-gradient), &r2, regularization)?;
    let decrement = direction.dot(&(hessian * &direction)).max(0.0).sqrt();
    Ok(NewtonStep {
        direction,
        multiplier,
        decrement,
    })
}

/// Step cap along `direction` from a strictly interior `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryStep {
    /// Distance to the boundary in step units, capped at 1.
    pub alpha_max: f64,
    /// Largest step the solver will try: `min(1, fraction · distance)`.
    pub usable: f64,
}

/// Fraction-to-boundary rule. Exact for affine constraints; bisection on
/// the step otherwise.
pub fn fraction_to_boundary(
    constraints: &[Constraint],
    x: &DVector<f64>,
    direction: &DVector<f64>,
    fraction: f64,
) -> BoundaryStep {
    let mut hit = f64::INFINITY;
    let search_end = 1.0 / fraction;
    let mut curved = Vec::new();
    for g in constraints {
        match g {
            Constraint::Affine { normal, .. } => {
                let slope = normal.dot(direction);
                if slope > 0.0 {
                    hit = hit.min(-g.value(x) / slope);
                }
            }
            _ => curved.push(g),
        }
    }
    if !curved.is_empty() {
        let interior = |a: f64| {
            let y = x + direction * a;
            curved.iter().all(|g| {
                let v = g.value(&y);
                v < 0.0 && v.is_finite()
            })
        };
        if !interior(search_end) {
            let (mut lo, mut hi) = (0.0, search_end);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if interior(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            hit = hit.min(lo);
        }
    }
    BoundaryStep {
        alpha_max: hit.min(1.0),
        usable: (fraction * hit).min(1.0),
    }
}

/// Per-member data of one subproblem, frozen at the snapshot.
struct Member<'a> {
    node: usize,
    offset: usize,
    anchor: &'a DVector<f64>,
    cost_gradient: DVector<f64>,
    smoothness: f64,
    constraints: &'a [Constraint],
    /// Constraint values at the anchor. Affine constraints are tracked as
    /// `g(anchor) + normalᵀp`, which avoids cancellation near the boundary.
    anchor_values: Vec<f64>,
}

struct Subproblem<'a> {
    members: Vec<Member<'a>>,
    coupling: DMatrix<f64>,
    kept_rows: Vec<usize>,
    rho: f64,
    dim: usize,
}

impl<'a> Subproblem<'a> {
    fn new(spec: &'a ProblemSpec, owner: usize, snapshot: &'a Allocation) -> Self {
        let nodes = spec.graph.closed_neighborhood(owner);
        let mut offset = 0;
        let members: Vec<Member> = nodes
            .iter()
            .map(|&j| {
                let node = &spec.nodes[j];
                let anchor = snapshot.block(j);
                let m = Member {
                    node: j,
                    offset,
                    anchor,
                    cost_gradient: node.cost.gradient(anchor),
                    smoothness: node.smoothness,
                    constraints: &node.constraints,
                    anchor_values: node.constraints.iter().map(|g| g.value(anchor)).collect(),
                };
                offset += node.dim;
                m
            })
            .collect();
        let dim = offset;
        let rows = spec.coupling_rows();
        let mut full = DMatrix::zeros(rows, dim);
        for m in &members {
            let block = &spec.nodes[m.node].coupling;
            full.view_mut((0, m.offset), (rows, block.ncols())).copy_from(block);
        }
        let kept_rows: Vec<usize> = (0..rows).filter(|&r| full.row(r).iter().any(|&v| v != 0.0)).collect();
        let coupling = full.select_rows(&kept_rows);
        Subproblem {
            members,
            coupling,
            kept_rows,
            rho: spec.rho,
            dim,
        }
    }

    fn slice(&self, p: &DVector<f64>, m: &Member) -> DVector<f64> {
        p.rows(m.offset, m.anchor.len()).into_owned()
    }

    fn constraint_value(&self, m: &Member, c: usize, pj: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match &m.constraints[c] {
            Constraint::Affine { normal, .. } => m.anchor_values[c] + normal.dot(pj),
            g => g.value(y),
        }
    }

    /// Objective minus the constant `Σ f_j(x_j)`.
    fn value(&self, p: &DVector<f64>) -> Result<f64> {
        self.value_and_magnitude(p).map(|(v, _)| v)
    }

    /// Objective together with the sum of the absolute values of its terms,
    /// which sets the rounding level of the objective.
    fn value_and_magnitude(&self, p: &DVector<f64>) -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut magnitude = 0.0;
        for m in &self.members {
            let pj = self.slice(p, m);
            let linear = m.cost_gradient.dot(&pj);
            let quadratic = 0.5 * m.smoothness * pj.norm_squared();
            total += linear + quadratic;
            magnitude += linear.abs() + quadratic;
            if !m.constraints.is_empty() {
                let y = m.anchor + &pj;
                let mut b = 0.0;
                for c in 0..m.constraints.len() {
                    let v = self.constraint_value(m, c, &pj, &y);
                    if !(v < 0.0) || !v.is_finite() {
                        return Err(DfmError::BarrierUndefined {
                            node: m.node,
                            constraint: c,
                            value: v,
                        });
                    }
                    b -= 1.0 / v;
                }
                total += self.rho * b;
                magnitude += self.rho * b;
            }
        }
        Ok((total, magnitude))
    }

    fn derivatives(&self, p: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut grad = DVector::zeros(self.dim);
        let mut hess = DMatrix::zeros(self.dim, self.dim);
        for m in &self.members {
            let d = m.anchor.len();
            let pj = self.slice(p, m);
            let mut gj = &m.cost_gradient + &pj * m.smoothness;
            let mut hj = DMatrix::identity(d, d) * m.smoothness;
            if !m.constraints.is_empty() {
                let y = m.anchor + &pj;
                for (c, g) in m.constraints.iter().enumerate() {
                    let v = self.constraint_value(m, c, &pj, &y);
                    if !(v < 0.0) || !v.is_finite() {
                        return Err(DfmError::BarrierUndefined {
                            node: m.node,
                            constraint: c,
                            value: v,
                        });
                    }
                    let t = barrier::barrier_term_with_value(g, &y, v);
                    gj += t.gradient * self.rho;
                    hj += t.hessian * self.rho;
                }
            }
            grad.rows_mut(m.offset, d).copy_from(&gj);
            hess.view_mut((m.offset, m.offset), (d, d)).copy_from(&hj);
        }
        Ok((grad, hess))
    }

    fn step_cap(&self, p: &DVector<f64>, direction: &DVector<f64>, fraction: f64) -> f64 {
        let mut usable = 1.0_f64;
        for m in &self.members {
            if m.constraints.is_empty() {
                continue;
            }
            let y = m.anchor + self.slice(p, m);
            let d = self.slice(direction, m);
            usable = usable.min(fraction_to_boundary(m.constraints, &y, &d, fraction).usable);
        }
        usable
    }

    fn plan(&self, owner: usize, p: &DVector<f64>, w: &DVector<f64>, rows: usize, residual: f64, iterations: usize) -> ReallocationPlan {
        let mut multiplier = DVector::zeros(rows);
        for (k, &r) in self.kept_rows.iter().enumerate() {
            multiplier[r] = -w[k];
        }
        ReallocationPlan {
            owner,
            members: self.members.iter().map(|m| m.node).collect(),
            deltas: self.members.iter().map(|m| self.slice(p, m)).collect(),
            multiplier,
            kkt_residual: residual,
            iterations,
        }
    }

    fn newton(&self, grad: &DVector<f64>, hess: &DMatrix<f64>, p: &DVector<f64>) -> Result<NewtonStep> {
        match newton_kkt_step(hess, grad, &self.coupling, p, 0.0) {
            Err(DfmError::RankDeficientCoupling) => newton_kkt_step(hess, grad, &self.coupling, p, KKT_REGULARIZATION),
            other => other,
        }
    }
}

/// The second-order model predicts a decrease below the rounding level of
/// an objective whose terms sum to `magnitude` in absolute value.
fn negligible_gain(decrement: f64, magnitude: f64) -> bool {
    0.5 * decrement * decrement <= 1e-13 * (1.0 + magnitude)
}

/// Solves owner `i`'s neighborhood subproblem against `snapshot`.
///
/// On iteration-cap exhaustion the error carries the best plan found, which
/// still keeps the coupling value and strict interiority.
pub fn solve_subproblem(
    spec: &ProblemSpec,
    owner: usize,
    snapshot: &Allocation,
    options: &SubproblemOptions,
) -> Result<ReallocationPlan> {
    if owner >= spec.node_count() {
        return Err(DfmError::InvalidArgument(format!("owner {owner} out of range")));
    }
    if !(options.tol > 0.0) {
        return Err(DfmError::InvalidArgument("subproblem tolerance must be positive".into()));
    }
    let sub = Subproblem::new(spec, owner, snapshot);
    let rows = spec.coupling_rows();
    let mut p = DVector::zeros(sub.dim);
    let mut phi = sub.value(&p).map_err(|_| {
        DfmError::InfeasibleStart(format!("snapshot is not strictly interior in the neighborhood of node {owner}"))
    })?;
    let mut last_w = DVector::zeros(sub.coupling.nrows());
    let mut residual = f64::INFINITY;

    for iteration in 0..options.max_iterations {
        let (grad, hess) = sub.derivatives(&p)?;
        let step = sub.newton(&grad, &hess, &p)?;
        let previous = residual;
        residual = linalg::max_abs(&(&hess * &step.direction));
        let scale = 1.0 + linalg::max_abs(&grad);
        let drift = linalg::max_abs(&(&sub.coupling * &p));
        last_w = step.multiplier.clone();
        let magnitude = sub.value_and_magnitude(&p)?.1;
        let at_precision_floor = residual > 0.5 * previous && negligible_gain(step.decrement, magnitude);
        if (residual <= options.tol * scale || at_precision_floor) && drift <= options.tol {
            return Ok(sub.plan(owner, &p, &last_w, rows, residual, iteration));
        }

        let slope = grad.dot(&step.direction);
        let mut alpha = sub.step_cap(&p, &step.direction, options.boundary_fraction);
        let mut accepted = false;
        while alpha > 1e-16 {
            let trial = &p + &step.direction * alpha;
            if let Ok(v) = sub.value(&trial) {
                if v <= phi + options.armijo * alpha * slope.min(0.0) {
                    p = trial;
                    phi = v;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // The model predicts no gain above rounding level: the point is optimal to working precision.
            if negligible_gain(step.decrement, magnitude) && drift <= options.tol {
                return Ok(sub.plan(owner, &p, &last_w, rows, residual, iteration));
            }
            break;
        }
    }
    let best = sub.plan(owner, &p, &last_w, rows, residual, options.max_iterations);
    Err(DfmError::SubproblemNotConverged {
        owner,
        iterations: options.max_iterations,
        residual,
        best: Box::new(best),
    })
}

/// Subproblem objective `Σ_j f_j^k(x_j + p_j) + ρ B_j(x_j + p_j)` of a plan.
pub fn plan_objective(spec: &ProblemSpec, snapshot: &Allocation, plan: &ReallocationPlan) -> Result<f64> {
    let mut total = 0.0;
    for (&j, d) in plan.members.iter().zip(&plan.deltas) {
        let node = &spec.nodes[j];
        let anchor = snapshot.block(j);
        let y = anchor + d;
        total += crate::model::surrogate_value(node, &y, anchor);
        total += spec.rho * barrier::barrier_value(node, &y).map_err(|e| with_node(e, j))?;
    }
    Ok(total)
}

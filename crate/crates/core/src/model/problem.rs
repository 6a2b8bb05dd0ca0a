use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::oracle::{Constraint, Cost};
use crate::barrier;
use crate::error::{DfmError, Result};

/// Default feasibility tolerance on `‖Ax - c‖∞`.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// A point is strictly interior when every `g(x) <= -INTERIOR_TOL`.
pub const INTERIOR_TOL: f64 = 1e-12;
/// Floor applied to analytic smoothness constants.
pub const MIN_SMOOTHNESS: f64 = 1e-9;

/// One node's local data: cost, smoothness constant, local constraints and
/// coupling block.
#[derive(Debug, Clone)]
pub struct NodeLocal {
    pub dim: usize,
    pub cost: Cost,
    pub smoothness: f64,
    pub constraints: Vec<Constraint>,
    pub coupling: DMatrix<f64>,
}

impl NodeLocal {
    /// Node with a built-in cost family; the smoothness constant is computed
    /// analytically.
    pub fn new(cost: Cost, coupling: DMatrix<f64>, constraints: Vec<Constraint>) -> Result<Self> {
        let smoothness = cost.smoothness().ok_or_else(|| {
            DfmError::InvalidArgument("custom costs need an explicit smoothness constant".into())
        })?;
        // Affine costs are L-smooth for every L > 0; keep the surrogate strictly convex.
        let smoothness = smoothness.max(MIN_SMOOTHNESS);
        Self::with_smoothness(cost, smoothness, coupling, constraints)
    }

    pub fn with_smoothness(
        cost: Cost,
        smoothness: f64,
        coupling: DMatrix<f64>,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        let dim = coupling.ncols();
        if let Some(d) = cost.dim() {
            if d != dim {
                return Err(DfmError::DimensionMismatch(format!(
                    "cost has dimension {d}, coupling block has {dim} columns"
                )));
            }
        }
        for (j, c) in constraints.iter().enumerate() {
            if let Some(d) = c.dim() {
                if d != dim {
                    return Err(DfmError::DimensionMismatch(format!(
                        "constraint {j} has dimension {d}, block has {dim}"
                    )));
                }
            }
        }
        Ok(NodeLocal {
            dim,
            cost,
            smoothness,
            constraints,
            coupling,
        })
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// `max_j g_j(x)`, or `-inf` without local constraints.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|g| g.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Instance family marker; only the rate-control tag changes behaviour
/// (the second reachability shortcut and the initialization rule).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    #[default]
    Generic,
    Dispatch,
    MultiResource,
    RateControl,
}

/// A full problem instance: graph, per-node data, right-hand side and
/// barrier weight.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: InstanceKind,
    pub graph: Graph,
    pub nodes: Vec<NodeLocal>,
    pub rhs: DVector<f64>,
    pub rho: f64,
    /// Smoothness constant of the constraint functions.
    pub beta: Option<f64>,
    /// Lipschitz constant of the constraint functions on the local sets.
    pub beta1: Option<f64>,
    /// A lower bound on the optimal value of the unbarriered problem.
    pub f_lower: Option<f64>,
}

impl ProblemSpec {
    pub fn new(graph: Graph, nodes: Vec<NodeLocal>, rhs: DVector<f64>, rho: f64) -> Self {
        ProblemSpec {
            name: String::from("instance"),
            kind: InstanceKind::Generic,
            graph,
            nodes,
            rhs,
            rho,
            beta: None,
            beta1: None,
            f_lower: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_kind(mut self, kind: InstanceKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn coupling_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn total_dim(&self) -> usize {
        self.nodes.iter().map(|n| n.dim).sum()
    }

    /// Start offset of each block in the stacked vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.nodes.len());
        let mut acc = 0;
        for n in &self.nodes {
            off.push(acc);
            acc += n.dim;
        }
        off
    }

    pub fn max_constraints(&self) -> usize {
        self.nodes.iter().map(|n| n.constraint_count()).max().unwrap_or(0)
    }

    pub fn has_barriers(&self) -> bool {
        self.nodes.iter().any(|n| !n.constraints.is_empty())
    }

    /// Largest smoothness constant `L = max L_i`.
    pub fn max_smoothness(&self) -> f64 {
        self.nodes.iter().map(|n| n.smoothness).fold(0.0, f64::max)
    }

    /// The stacked coupling matrix `A = [A_1, …, A_n]`.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let m = self.coupling_rows();
        let mut a = DMatrix::zeros(m, self.total_dim());
        for (node, off) in self.nodes.iter().zip(self.offsets()) {
            a.view_mut((0, off), (m, node.dim)).copy_from(&node.coupling);
        }
        a
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural checks on an instance. Never fails; problems are listed in the report.
pub fn validate_problem(spec: &ProblemSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if spec.nodes.is_empty() {
        report.violations.push("empty node set".into());
    }
    if spec.graph.node_count() != spec.nodes.len() {
        report.violations.push(format!(
            "node count mismatch: graph has {}, spec has {}",
            spec.graph.node_count(),
            spec.nodes.len()
        ));
    }
    if !(spec.rho > 0.0) {
        report.violations.push("barrier weight must be positive".into());
    }
    let m = spec.coupling_rows();
    for (i, node) in spec.nodes.iter().enumerate() {
        if node.coupling.nrows() != m {
            report.violations.push(format!(
                "coupling row mismatch: node {i} has {} rows, rhs has {m}",
                node.coupling.nrows()
            ));
        }
        if node.coupling.ncols() != node.dim || node.dim == 0 {
            report.violations.push(format!("node {i}: block dimension {} inconsistent", node.dim));
        }
        if !(node.smoothness > 0.0) || !node.smoothness.is_finite() {
            report
                .violations
                .push(format!("node {i}: smoothness constant must be positive, got {}", node.smoothness));
        }
        if let Some(d) = node.cost.dim() {
            if d != node.dim {
                report.violations.push(format!("node {i}: cost dimension {d} != block dimension {}", node.dim));
            }
        }
        for (j, g) in node.constraints.iter().enumerate() {
            if let Some(d) = g.dim() {
                if d != node.dim {
                    report
                        .violations
                        .push(format!("node {i}: constraint {j} dimension {d} != block dimension {}", node.dim));
                }
            }
        }
    }
    if spec.graph.node_count() > 0 && !spec.graph.is_connected() {
        report.warnings.push("communication graph is disconnected".into());
    }
    for (name, v) in [("beta", spec.beta), ("beta1", spec.beta1)] {
        if let Some(v) = v {
            if v < 0.0 {
                report.violations.push(format!("{name} must be non-negative"));
            }
        }
    }
    report
}

fn check_blocks(spec: &ProblemSpec, blocks: &[DVector<f64>]) -> Result<()> {
    if blocks.len() != spec.nodes.len() {
        return Err(DfmError::DimensionMismatch(format!(
            "{} blocks for {} nodes",
            blocks.len(),
            spec.nodes.len()
        )));
    }
    for (i, (b, n)) in blocks.iter().zip(&spec.nodes).enumerate() {
        if b.len() != n.dim {
            return Err(DfmError::DimensionMismatch(format!(
                "block {i} has length {}, expected {}",
                b.len(),
                n.dim
            )));
        }
        if n.coupling.nrows() != spec.coupling_rows() {
            return Err(DfmError::DimensionMismatch(format!("node {i} coupling rows")));
        }
    }
    Ok(())
}

/// `Σ A_i x_i - c`.
pub fn coupling_residual(spec: &ProblemSpec, blocks: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_blocks(spec, blocks)?;
    let mut r = -spec.rhs.clone();
    for (node, x) in spec.nodes.iter().zip(blocks) {
        r += &node.coupling * x;
    }
    Ok(r)
}

/// The stacked iterate together with its feasibility metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    blocks: Vec<DVector<f64>>,
    residual: DVector<f64>,
    interior_margin: f64,
}

impl Allocation {
    /// Builds an allocation; residual and margin are recomputed here.
    pub fn new(spec: &ProblemSpec, blocks: Vec<DVector<f64>>) -> Result<Self> {
        let residual = coupling_residual(spec, &blocks)?;
        let interior_margin = spec
            .nodes
            .iter()
            .zip(&blocks)
            .map(|(n, x)| n.margin(x))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Allocation {
            blocks,
            residual,
            interior_margin,
        })
    }

    pub fn from_scalars(spec: &ProblemSpec, values: &[f64]) -> Result<Self> {
        Self::new(spec, values.iter().map(|&v| DVector::from_element(1, v)).collect())
    }

    pub fn from_stacked(spec: &ProblemSpec, x: &DVector<f64>) -> Result<Self> {
        if x.len() != spec.total_dim() {
            return Err(DfmError::DimensionMismatch(format!(
                "stacked vector has length {}, expected {}",
                x.len(),
                spec.total_dim()
            )));
        }
        let blocks = spec
            .nodes
            .iter()
            .zip(spec.offsets())
            .map(|(n, off)| x.rows(off, n.dim).into_owned())
            .collect();
        Self::new(spec, blocks)
    }

    pub fn blocks(&self) -> &[DVector<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DVector<f64> {
        &self.blocks[i]
    }

    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    pub fn residual_inf(&self) -> f64 {
        self.residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max_{i,j} g_i^j(x_i)`; `-inf` when there are no local constraints.
    pub fn interior_margin(&self) -> f64 {
        self.interior_margin
    }

    pub fn is_interior(&self) -> bool {
        self.interior_margin <= -INTERIOR_TOL
    }

    pub fn is_feasible(&self) -> bool {
        self.is_feasible_with(FEASIBILITY_TOL)
    }

    pub fn is_feasible_with(&self, tol: f64) -> bool {
        self.residual_inf() <= tol && self.is_interior()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n: usize = self.blocks.iter().map(|b| b.len()).sum();
        let mut v = DVector::zeros(n);
        let mut off = 0;
        for b in &self.blocks {
            v.rows_mut(off, b.len()).copy_from(b);
            off += b.len();
        }
        v
    }

    pub fn into_blocks(self) -> Vec<DVector<f64>> {
        self.blocks
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// `Σ f_i(x_i)`.
    pub f: f64,
    /// `Σ B_i(x_i)` (zero without local constraints).
    pub barrier: f64,
    /// `f + ρ B`.
    pub total: f64,
}

pub fn evaluate_objective(spec: &ProblemSpec, x: &Allocation) -> Result<ObjectiveValue> {
    check_blocks(spec, x.blocks())?;
    let mut f = 0.0;
    let mut b = 0.0;
    for (i, (node, xi)) in spec.nodes.iter().zip(x.blocks()).enumerate() {
        f += node.cost.value(xi);
        b += barrier::barrier_value(node, xi).map_err(|e| with_node(e, i))?;
    }
    Ok(ObjectiveValue {
        f,
        barrier: b,
        total: f + spec.rho * b,
    })
}

/// Stacked gradient `∇F(x) = ∇f(x) + ρ∇B(x)`.
pub fn objective_gradient(spec: &ProblemSpec, x: &Allocation) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(spec.total_dim());
    for (i, ((node, xi), off)) in spec.nodes.iter().zip(x.blocks()).zip(spec.offsets()).enumerate() {
        let mut gi = node.cost.gradient(xi);
        if !node.constraints.is_empty() {
            let be = barrier::barrier_eval(node, xi).map_err(|e| with_node(e, i))?;
            gi += be.gradient * spec.rho;
        }
        g.rows_mut(off, node.dim).copy_from(&gi);
    }
    Ok(g)
}

pub(crate) fn with_node(e: DfmError, node: usize) -> DfmError {
    match e {
        DfmError::BarrierUndefined { constraint, value, .. } => DfmError::BarrierUndefined {
            node,
            constraint,
            value,
        },
        other => other,
    }
}

/// Quadratic upper model `f(a) + ⟨∇f(a), x - a⟩ + (L/2)‖x - a‖²`.
pub fn surrogate_value(node: &NodeLocal, x: &DVector<f64>, anchor: &DVector<f64>) -> f64 {
    let d = x - anchor;
    node.cost.value(anchor) + node.cost.gradient(anchor).dot(&d) + 0.5 * node.smoothness * d.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example1() -> ProblemSpec {
        let theta = [1.0, 0.0, 0.0, 1.0];
        let a = [1.0, 0.0, 0.0, 1.0];
        let nodes = (0..4)
            .map(|i| {
                NodeLocal::new(
                    Cost::half_squared_distance(&[theta[i]]),
                    DMatrix::from_element(1, 1, a[i]),
                    vec![],
                )
                .unwrap()
            })
            .collect();
        ProblemSpec::new(Graph::line(4), nodes, DVector::from_element(1, 1.0), 1.0)
    }

    fn unit_box_node(cost: Cost) -> NodeLocal {
        NodeLocal::with_smoothness(
            cost,
            1.0,
            DMatrix::from_element(1, 1, 1.0),
            vec![Constraint::lower_bound(1, 0, 0.0), Constraint::upper_bound(1, 0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn example1_is_valid_and_warning_free() {
        let r = validate_problem(&example1());
        assert!(r.is_valid(), "{r:?}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn coupling_row_mismatch_is_reported() {
        let mut spec = example1();
        spec.nodes[1].coupling = DMatrix::zeros(3, 1);
        spec.nodes[0].coupling = DMatrix::zeros(2, 1);
        let r = validate_problem(&spec);
        assert!(r.violations.iter().any(|v| v.contains("coupling row mismatch")));
    }

    #[test]
    fn zero_rho_is_reported() {
        let spec = example1().with_rho(0.0);
        let r = validate_problem(&spec);
        assert!(r.violations.iter().any(|v| v == "barrier weight must be positive"));
    }

    #[test]
    fn disconnected_graph_is_a_warning() {
        let mut spec = example1();
        spec.graph = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let r = validate_problem(&spec);
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn residuals() {
        let spec = example1();
        let x = Allocation::from_scalars(&spec, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(x.residual()[0], 0.0);
        let x = Allocation::from_scalars(&spec, &[0.0; 4]).unwrap();
        assert_eq!(x.residual()[0], -1.0);

        let nodes = (0..2)
            .map(|_| NodeLocal::new(Cost::half_squared_distance(&[0.0, 0.0]), DMatrix::identity(2, 2), vec![]).unwrap())
            .collect();
        let spec = ProblemSpec::new(Graph::complete(2), nodes, DVector::from_vec(vec![1.0, 1.0]), 1.0);
        let half = DVector::from_vec(vec![0.5, 0.5]);
        let r = coupling_residual(&spec, &[half.clone(), half]).unwrap();
        assert_eq!(r, DVector::zeros(2));
    }

    #[test]
    fn residual_dimension_mismatch() {
        let spec = example1();
        assert!(matches!(
            coupling_residual(&spec, &vec![DVector::zeros(1); 3]),
            Err(DfmError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn objective_of_example1() {
        let spec = example1();
        let x = Allocation::from_scalars(&spec, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let v = evaluate_objective(&spec, &x).unwrap();
        assert_relative_eq!(v.f, 0.5);
        assert_eq!(v.barrier, 0.0);
        assert_relative_eq!(v.total, 0.5);
    }

    #[test]
    fn objective_with_unit_box_barrier() {
        let node = unit_box_node(Cost::scalar_quadratic(0.0, 0.0, 0.0));
        let spec = ProblemSpec::new(Graph::empty(1), vec![node], DVector::from_element(1, 0.5), 1.0);
        let x = Allocation::from_scalars(&spec, &[0.5]).unwrap();
        let v = evaluate_objective(&spec, &x).unwrap();
        assert_relative_eq!(v.barrier, 4.0);
        assert_relative_eq!(v.total, 4.0);

        let boundary = Allocation::from_scalars(&spec, &[1.0]).unwrap();
        assert!(matches!(
            evaluate_objective(&spec, &boundary),
            Err(DfmError::BarrierUndefined { node: 0, .. })
        ));
    }

    #[test]
    fn surrogate_examples() {
        let node = NodeLocal::new(Cost::half_squared_distance(&[1.0]), DMatrix::from_element(1, 1, 1.0), vec![]).unwrap();
        let zero = DVector::zeros(1);
        assert_relative_eq!(surrogate_value(&node, &zero, &zero), 0.5);
        assert_relative_eq!(surrogate_value(&node, &DVector::from_element(1, 1.0), &zero), 0.0);
    }

    #[test]
    fn feasibility_flags() {
        let node = unit_box_node(Cost::scalar_quadratic(1.0, 0.0, 0.0));
        let spec = ProblemSpec::new(Graph::empty(1), vec![node], DVector::from_element(1, 0.5), 1.0);
        assert!(Allocation::from_scalars(&spec, &[0.5]).unwrap().is_feasible());
        assert!(!Allocation::from_scalars(&spec, &[0.6]).unwrap().is_feasible());
        assert!(!Allocation::from_scalars(&spec, &[1.0]).unwrap().is_interior());
    }
}

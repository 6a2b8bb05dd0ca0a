//! Edge-pairwise reallocation baselines.
//!
//! Each edge `{i, j}` solves a two-node surrogate problem that keeps
//! `A_i x_i + A_j x_j` fixed, and each node applies the weighted sum of the
//! changes proposed to it. The constrained variant also keeps both endpoints
//! inside their local sets. These methods can stall at non-optimal points,
//! which is what they are here to show.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};
use crate::model::{Allocation, Constraint, Graph, ProblemSpec};
use crate::qp;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    weights: BTreeMap<(usize, usize), f64>,
}

impl EdgeWeights {
    /// `w_ij = 1 / max(|N̄_i|, |N̄_j|)`.
    pub fn default_for(graph: &Graph) -> Self {
        let weights = graph
            .edges()
            .map(|(i, j)| ((i, j), 1.0 / graph.closed_degree(i).max(graph.closed_degree(j)) as f64))
            .collect();
        EdgeWeights { weights }
    }

    pub fn uniform(graph: &Graph, w: f64) -> Self {
        EdgeWeights {
            weights: graph.edges().map(|e| (e, w)).collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        self.weights.insert((i.min(j), i.max(j)), w);
    }

    /// Largest `Σ_{j ∈ N_i} w_ij`.
    pub fn max_row_sum(&self, graph: &Graph) -> f64 {
        (0..graph.node_count())
            .map(|i| graph.neighbors(i).iter().map(|&j| self.get(i, j)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Changes proposed on one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPlan {
    pub edge: (usize, usize),
    /// Change for the first endpoint.
    pub first: DVector<f64>,
    /// Change for the second endpoint.
    pub second: DVector<f64>,
}

fn affine_rows(constraints: &[Constraint], x: &DVector<f64>) -> Result<Vec<(DVector<f64>, f64)>> {
    constraints
        .iter()
        .map(|g| match g {
            Constraint::Affine { normal, .. } => Ok((normal.clone(), (-g.value(x)).max(0.0))),
            _ => Err(DfmError::InvalidArgument(
                "the constrained pairwise baseline supports affine local constraints only".into(),
            )),
        })
        .collect()
}

/// Solves the two-node surrogate problem on edge `(i, j)`.
pub fn solve_pair(spec: &ProblemSpec, state: &Allocation, i: usize, j: usize, constrained: bool) -> Result<PairPlan> {
    let (ni, nj) = (&spec.nodes[i], &spec.nodes[j]);
    let (xi, xj) = (state.block(i), state.block(j));
    let (di, dj) = (ni.dim, nj.dim);
    let n = di + dj;

    let mut h = DMatrix::zeros(n, n);
    h.view_mut((0, 0), (di, di)).fill_diagonal(ni.smoothness);
    h.view_mut((di, di), (dj, dj)).fill_diagonal(nj.smoothness);
    let mut g = DVector::zeros(n);
    g.rows_mut(0, di).copy_from(&ni.cost.gradient(xi));
    g.rows_mut(di, dj).copy_from(&nj.cost.gradient(xj));

    let rows = spec.coupling_rows();
    let mut eq = DMatrix::zeros(rows, n);
    eq.view_mut((0, 0), (rows, di)).copy_from(&ni.coupling);
    eq.view_mut((0, di), (rows, dj)).copy_from(&nj.coupling);

    let mut ineq_rows = Vec::new();
    if constrained {
        for (normal, room) in affine_rows(&ni.constraints, xi)? {
            let mut r = DVector::zeros(n);
            r.rows_mut(0, di).copy_from(&normal);
            ineq_rows.push((r, room));
        }
        for (normal, room) in affine_rows(&nj.constraints, xj)? {
            let mut r = DVector::zeros(n);
            r.rows_mut(di, dj).copy_from(&normal);
            ineq_rows.push((r, room));
        }
    }
    let mut ineq = DMatrix::zeros(ineq_rows.len(), n);
    let mut rhs = DVector::zeros(ineq_rows.len());
    for (k, (r, room)) in ineq_rows.into_iter().enumerate() {
        ineq.set_row(k, &r.transpose());
        rhs[k] = room;
    }
    let sol = qp::solve(&h, &g, &eq, &ineq, &rhs)?;
    Ok(PairPlan {
        edge: (i, j),
        first: sol.p.rows(0, di).into_owned(),
        second: sol.p.rows(di, dj).into_owned(),
    })
}

/// One synchronous round of the pairwise method.
pub fn pairwise_update(
    spec: &ProblemSpec,
    state: &Allocation,
    weights: &EdgeWeights,
    constrained: bool,
) -> Result<Allocation> {
    let graph = &spec.graph;
    if constrained {
        let worst = weights.max_row_sum(graph);
        if worst > 1.0 + 1e-12 {
            return Err(DfmError::WeightPrecondition(format!(
                "edge weights around a node sum to {worst} > 1"
            )));
        }
    }
    for (i, j) in graph.edges() {
        let w = weights.get(i, j);
        if !(w > 0.0) {
            return Err(DfmError::WeightPrecondition(format!("edge ({i}, {j}) has weight {w}")));
        }
    }
    let plans: Vec<PairPlan> = graph
        .edges()
        .map(|(i, j)| solve_pair(spec, state, i, j, constrained))
        .collect::<Result<_>>()?;
    let mut blocks: Vec<DVector<f64>> = state.blocks().to_vec();
    for plan in &plans {
        let (i, j) = plan.edge;
        let w = weights.get(i, j);
        blocks[i].axpy(w, &plan.first, 1.0);
        blocks[j].axpy(w, &plan.second, 1.0);
    }
    Allocation::new(spec, blocks)
}

//! Reallocation subspaces, the weighting matrix and the reachability test.
//!
//! Owner `i` can only move mass among its closed neighborhood, and only in
//! directions that keep `Σ A_j x_j` fixed. The span of those directions is
//! `S_i`. Any feasible point is reachable when `S_1 + … + S_n` is the whole
//! null space of the coupling map.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{StepSizes, DIAGNOSTICS_CAP};
use crate::error::{DfmError, Result};
use crate::linalg;
use crate::model::{InstanceKind, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub owner: usize,
    /// Orthonormal columns in the stacked space `ℝ^N`.
    pub basis: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `U Uᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

pub fn local_subspace_basis(spec: &ProblemSpec, owner: usize) -> SubspaceBasis {
    let members = spec.graph.closed_neighborhood(owner);
    let offsets = spec.offsets();
    let rows = spec.coupling_rows();
    let local_dim: usize = members.iter().map(|&j| spec.nodes[j].dim).sum();
    let mut local = DMatrix::zeros(rows, local_dim);
    let mut col = 0;
    for &j in &members {
        let d = spec.nodes[j].dim;
        local.view_mut((0, col), (rows, d)).copy_from(&spec.nodes[j].coupling);
        col += d;
    }
    let kernel = linalg::null_space(&local);
    let mut basis = DMatrix::zeros(spec.total_dim(), kernel.ncols());
    let mut col = 0;
    for &j in &members {
        let d = spec.nodes[j].dim;
        basis
            .view_mut((offsets[j], 0), (d, kernel.ncols()))
            .copy_from(&kernel.rows(col, d));
        col += d;
    }
    SubspaceBasis { owner, basis }
}

pub fn all_subspaces(spec: &ProblemSpec) -> Vec<SubspaceBasis> {
    (0..spec.node_count())
        .into_par_iter()
        .map(|i| local_subspace_basis(spec, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReachabilityReport {
    pub holds: bool,
    /// `dim(S_1 + … + S_n)`.
    pub dim_sum: usize,
    /// `N - rank(A)`.
    pub dim_null: usize,
    /// Every `S_i` lies inside the null space of `A`.
    pub subspaces_in_null: bool,
}

pub fn check_reachability(spec: &ProblemSpec) -> ReachabilityReport {
    let subspaces = all_subspaces(spec);
    let a = spec.coupling_matrix();
    let n = spec.total_dim();
    let total: usize = subspaces.iter().map(|s| s.dim()).sum();
    let mut stacked = DMatrix::zeros(n, total);
    let mut col = 0;
    let mut inside = true;
    for s in &subspaces {
        if s.dim() > 0 && (&a * &s.basis).amax() > 1e-10 * (1.0 + a.amax()) {
            inside = false;
        }
        stacked.view_mut((0, col), (n, s.dim())).copy_from(&s.basis);
        col += s.dim();
    }
    let dim_sum = linalg::rank(&stacked);
    let dim_null = n - linalg::rank(&a);
    ReachabilityReport {
        holds: dim_sum == dim_null && inside,
        dim_sum,
        dim_null,
        subspaces_in_null: inside,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShortcutVerdict {
    pub applies: bool,
    pub reason: String,
}

/// Cheap sufficient conditions for reachability: full-row-rank blocks on a
/// connected graph, or a rate-control instance whose graph links every pair
/// of transmitters sharing a link.
pub fn check_lemma1_shortcut(spec: &ProblemSpec) -> ShortcutVerdict {
    let connected = spec.graph.is_connected();
    let deficient: Vec<usize> = spec
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| linalg::rank(&n.coupling) < n.coupling.nrows())
        .map(|(i, _)| i)
        .collect();
    if connected && deficient.is_empty() {
        return ShortcutVerdict {
            applies: true,
            reason: "every coupling block has full row rank and the graph is connected".into(),
        };
    }
    if spec.kind == InstanceKind::RateControl {
        match missing_shared_link_edge(spec) {
            None if connected => {
                return ShortcutVerdict {
                    applies: true,
                    reason: "rate-control instance whose transmitters sharing a link are neighbors".into(),
                }
            }
            None => {
                return ShortcutVerdict {
                    applies: false,
                    reason: "rate-control instance on a disconnected graph".into(),
                }
            }
            Some((i, j)) => {
                return ShortcutVerdict {
                    applies: false,
                    reason: format!("transmitters {i} and {j} share a link but are not neighbors"),
                }
            }
        }
    }
    let reason = if !connected {
        "graph is disconnected".to_string()
    } else {
        format!("coupling blocks of nodes {deficient:?} lack full row rank")
    };
    ShortcutVerdict { applies: false, reason }
}

fn missing_shared_link_edge(spec: &ProblemSpec) -> Option<(usize, usize)> {
    for r in 0..spec.coupling_rows() {
        let users: Vec<usize> = spec
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.coupling.row(r).iter().any(|&v| v != 0.0))
            .map(|(i, _)| i)
            .collect();
        for (k, &i) in users.iter().enumerate() {
            for &j in &users[k + 1..] {
                if !spec.graph.has_edge(i, j) {
                    return Some((i, j));
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightingMatrix {
    /// `W = Σ η_i P_i`.
    pub matrix: DMatrix<f64>,
    /// Smallest eigenvalue above `1e-9`; `None` when `W = 0`.
    pub lambda_min_nonzero: Option<f64>,
    pub rank: usize,
    /// `Null(W) = Range(Aᵀ)`, checked only when reachability holds.
    pub null_matches_range: Option<bool>,
}

pub const EIGEN_FLOOR: f64 = 1e-9;

pub fn weighting_matrix(spec: &ProblemSpec, eta: &StepSizes) -> Result<WeightingMatrix> {
    let n = spec.total_dim();
    if n > DIAGNOSTICS_CAP {
        return Err(DfmError::DiagnosticsUnavailable {
            size: n,
            cap: DIAGNOSTICS_CAP,
        });
    }
    if eta.eta.len() != spec.node_count() {
        return Err(DfmError::DimensionMismatch(format!(
            "{} step sizes for {} nodes",
            eta.eta.len(),
            spec.node_count()
        )));
    }
    let mut w = DMatrix::zeros(n, n);
    for s in all_subspaces(spec) {
        if s.dim() > 0 {
            w += s.projector() * eta.eta[s.owner];
        }
    }
    w = (&w + w.transpose()) * 0.5;
    let eig = linalg::symmetric_eigenvalues(&w);
    let positive: Vec<f64> = eig.iter().copied().filter(|&v| v > EIGEN_FLOOR).collect();
    let rank = positive.len();
    let lambda_min_nonzero = positive.first().copied();

    let null_matches_range = if check_reachability(spec).holds {
        let a = spec.coupling_matrix();
        let range_rank = linalg::rank(&a);
        let annihilates = (&w * a.transpose()).amax() <= 1e-10 * (1.0 + a.amax());
        Some(annihilates && rank + range_rank == n)
    } else {
        None
    };
    Ok(WeightingMatrix {
        matrix: w,
        lambda_min_nonzero,
        rank,
        null_matches_range,
    })
}

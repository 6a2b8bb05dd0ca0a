//! Two-resource allocation: each user consumes renewable and coal power,
//! `x_i = (r_i, k_i)`, with both totals balancing to zero across the network.
//! Generators may take negative values down to their capacity in the
//! resource they produce.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_connected_graph;
use crate::error::{DfmError, Result};
use crate::model::{Constraint, Cost, Graph, InstanceKind, NodeLocal, ProblemSpec};

pub const DEFAULT_RHO: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Role {
    /// Produces up to `capacity` units of renewable power.
    Renewable { capacity: f64 },
    /// Produces up to `capacity` units of coal power.
    Coal { capacity: f64 },
    Consumer,
}

impl Role {
    /// Lower bound on `(r, k)`.
    pub fn floor(self) -> [f64; 2] {
        match self {
            Role::Renewable { capacity } => [-capacity, 0.0],
            Role::Coal { capacity } => [0.0, -capacity],
            Role::Consumer => [0.0, 0.0],
        }
    }
}

/// Disutility `α (r + k - D)² + β k²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Participant {
    pub alpha: f64,
    pub beta: f64,
    pub demand: f64,
    pub role: Role,
}

pub fn gen_multi_resource(participants: &[Participant], graph: Graph) -> Result<ProblemSpec> {
    if participants.len() != graph.node_count() {
        return Err(DfmError::DimensionMismatch(format!(
            "{} participants on a graph with {} nodes",
            participants.len(),
            graph.node_count()
        )));
    }
    // Σ r = 0 and Σ k = 0 with every coordinate strictly above its floor
    // needs a strictly negative floor in each resource.
    let floors: Vec<[f64; 2]> = participants.iter().map(|p| p.role.floor()).collect();
    for (k, name) in ["renewable", "coal"].iter().enumerate() {
        if floors.iter().map(|f| f[k]).sum::<f64>() >= 0.0 {
            return Err(DfmError::NoStrictlyFeasiblePoint(format!("no {name} generator with positive capacity")));
        }
    }
    let mut nodes = Vec::with_capacity(participants.len());
    for (p, floor) in participants.iter().zip(&floors) {
        if !(p.alpha > 0.0 && p.beta > 0.0) {
            return Err(DfmError::InvalidProblem("alpha and beta must be positive".into()));
        }
        nodes.push(NodeLocal::new(
            Cost::multi_resource(p.alpha, p.beta, p.demand),
            DMatrix::identity(2, 2),
            vec![Constraint::lower_bound(2, 0, floor[0]), Constraint::lower_bound(2, 1, floor[1])],
        )?);
    }
    let mut spec = ProblemSpec::new(graph, nodes, DVector::zeros(2), DEFAULT_RHO)
        .with_name("multi-resource")
        .with_kind(InstanceKind::MultiResource);
    spec.beta = Some(0.0);
    spec.beta1 = Some(1.0);
    spec.f_lower = Some(0.0);
    Ok(spec)
}

/// Four users on a path: one renewable generator, one coal generator, two consumers.
pub fn toy_multi_resource() -> ProblemSpec {
    let participants = [
        Participant {
            alpha: 1.0,
            beta: 1.0,
            demand: 0.5,
            role: Role::Renewable { capacity: 2.0 },
        },
        Participant {
            alpha: 1.0,
            beta: 0.5,
            demand: 1.0,
            role: Role::Consumer,
        },
        Participant {
            alpha: 2.0,
            beta: 1.0,
            demand: 1.0,
            role: Role::Consumer,
        },
        Participant {
            alpha: 1.0,
            beta: 1.0,
            demand: 0.5,
            role: Role::Coal { capacity: 2.0 },
        },
    ];
    gen_multi_resource(&participants, Graph::line(4)).expect("toy instance is strictly feasible")
}

/// Seeded instance: about a third of the users are generators, each
/// renewable or coal with equal probability.
pub fn random_multi_resource(n: usize, seed: u64) -> Result<ProblemSpec> {
    if n < 2 {
        return Err(DfmError::InvalidArgument("need at least two users".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut participants: Vec<Participant> = (0..n)
        .map(|_| {
            let role = if rng.random_bool(1.0 / 3.0) {
                let capacity = rng.random_range(1.0..4.0);
                if rng.random_bool(0.5) {
                    Role::Renewable { capacity }
                } else {
                    Role::Coal { capacity }
                }
            } else {
                Role::Consumer
            };
            Participant {
                alpha: rng.random_range(0.5..2.0),
                beta: rng.random_range(0.1..1.0),
                demand: rng.random_range(0.2..1.5),
                role,
            }
        })
        .collect();
    if !participants.iter().any(|p| matches!(p.role, Role::Renewable { .. })) {
        participants[0].role = Role::Renewable { capacity: 2.0 };
    }
    if !participants.iter().any(|p| matches!(p.role, Role::Coal { .. })) {
        let renewables = participants
            .iter()
            .filter(|p| matches!(p.role, Role::Renewable { .. }))
            .count();
        let slot = (0..n)
            .rev()
            .find(|&j| renewables > 1 || !matches!(participants[j].role, Role::Renewable { .. }))
            .expect("at least two users");
        participants[slot].role = Role::Coal { capacity: 2.0 };
    }
    let graph = random_connected_graph(n, n / 3, &mut rng);
    gen_multi_resource(&participants, graph)
}

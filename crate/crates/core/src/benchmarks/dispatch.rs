//! Economic dispatch: scalar generators with box limits sharing one demand.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matpower::{derive_generator_graph, CaseData};
use super::random_connected_graph;
use crate::error::{DfmError, Result};
use crate::model::{Constraint, Cost, Graph, InstanceKind, NodeLocal, ProblemSpec};

/// Barrier weight given to generated dispatch instances.
pub const DEFAULT_RHO: f64 = 1e-2;

/// Cost `c2 P² + c1 P + c0` on `[pmin, pmax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorUnit {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub pmin: f64,
    pub pmax: f64,
}

impl GeneratorUnit {
    pub fn cost(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }

    /// Exact minimum of the cost over the box.
    pub fn min_cost(&self) -> f64 {
        let candidate = if self.c2 > 0.0 {
            (-self.c1 / (2.0 * self.c2)).clamp(self.pmin, self.pmax)
        } else {
            self.pmin
        };
        [candidate, self.pmin, self.pmax]
            .into_iter()
            .map(|p| self.cost(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Demand at 60 % of the way from total minimum to total maximum output.
pub fn default_demand(units: &[GeneratorUnit]) -> f64 {
    let lo: f64 = units.iter().map(|u| u.pmin).sum();
    let hi: f64 = units.iter().map(|u| u.pmax).sum();
    lo + 0.6 * (hi - lo)
}

/// Builds `min Σ f_i(P_i)  s.t.  Σ P_i = demand, P_i ∈ [pmin_i, pmax_i]`.
pub fn dispatch_problem(units: &[GeneratorUnit], graph: Graph, demand: f64) -> Result<ProblemSpec> {
    if units.len() != graph.node_count() {
        return Err(DfmError::DimensionMismatch(format!(
            "{} units on a graph with {} nodes",
            units.len(),
            graph.node_count()
        )));
    }
    let lo: f64 = units.iter().map(|u| u.pmin).sum();
    let hi: f64 = units.iter().map(|u| u.pmax).sum();
    if let Some(k) = units.iter().position(|u| !(u.pmin < u.pmax)) {
        return Err(DfmError::InvalidProblem(format!("generator {k} has an empty output range")));
    }
    if !(lo < demand && demand < hi) {
        return Err(DfmError::NoStrictlyFeasiblePoint(format!(
            "demand {demand} must lie strictly between total minimum {lo} and total maximum {hi}"
        )));
    }
    let nodes = units
        .iter()
        .map(|u| {
            NodeLocal::new(
                Cost::scalar_quadratic(u.c2, u.c1, u.c0),
                DMatrix::from_element(1, 1, 1.0),
                vec![Constraint::lower_bound(1, 0, u.pmin), Constraint::upper_bound(1, 0, u.pmax)],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spec = ProblemSpec::new(graph, nodes, DVector::from_element(1, demand), DEFAULT_RHO)
        .with_name("dispatch")
        .with_kind(InstanceKind::Dispatch);
    spec.beta = Some(0.0);
    spec.beta1 = Some(1.0);
    spec.f_lower = Some(units.iter().map(GeneratorUnit::min_cost).sum());
    Ok(spec)
}

/// Dispatch instance from a parsed case, on the derived generator graph.
pub fn gen_economic_dispatch(case: &CaseData, demand: f64) -> Result<ProblemSpec> {
    let units = case_units(case);
    if units.is_empty() {
        return Err(DfmError::NoCostData);
    }
    let graph = derive_generator_graph(case)?;
    dispatch_problem(&units, graph, demand)
}

pub fn case_units(case: &CaseData) -> Vec<GeneratorUnit> {
    case.dispatch_units()
        .into_iter()
        .map(|u| GeneratorUnit {
            c2: u.c2,
            c1: u.c1,
            c0: u.c0,
            pmin: u.pmin,
            pmax: u.pmax,
        })
        .collect()
}

/// Small seeded instance with strongly convex costs on a random connected graph.
pub fn random_dispatch(n: usize, seed: u64) -> Result<ProblemSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units: Vec<GeneratorUnit> = (0..n)
        .map(|_| {
            let pmin = rng.random_range(0.0..1.0);
            GeneratorUnit {
                c2: rng.random_range(0.5..2.0),
                c1: rng.random_range(-1.0..1.0),
                c0: 0.0,
                pmin,
                pmax: pmin + rng.random_range(1.0..3.0),
            }
        })
        .collect();
    let graph = random_connected_graph(n, n / 2, &mut rng);
    let demand = default_demand(&units);
    dispatch_problem(&units, graph, demand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::matpower::synthetic_case;
    use crate::model::validate_problem;
    use crate::reachability::check_lemma1_shortcut;

    fn unit(c2: f64) -> GeneratorUnit {
        GeneratorUnit {
            c2,
            c1: 0.0,
            c0: 0.0,
            pmin: 0.0,
            pmax: 1.0,
        }
    }

    #[test]
    fn two_generators() {
        let spec = dispatch_problem(&[unit(1.0), unit(2.0)], Graph::complete(2), 1.0).unwrap();
        assert!(validate_problem(&spec).is_valid());
        assert_eq!(spec.coupling_rows(), 1);
    }

    #[test]
    fn demand_at_capacity_is_rejected() {
        let err = dispatch_problem(&[unit(1.0), unit(2.0)], Graph::complete(2), 2.0).unwrap_err();
        assert!(matches!(err, DfmError::NoStrictlyFeasiblePoint(_)));
    }

    #[test]
    fn min_cost_over_box() {
        let u = GeneratorUnit {
            c2: 1.0,
            c1: -4.0,
            c0: 0.0,
            pmin: 0.0,
            pmax: 1.0,
        };
        assert_eq!(u.min_cost(), -3.0);
    }

    #[test]
    fn synthetic_118_bus_case() {
        let case = synthetic_case(118, 54, 11).unwrap();
        let spec = gen_economic_dispatch(&case, default_demand(&case_units(&case))).unwrap();
        assert_eq!(spec.node_count(), 54);
        assert!(validate_problem(&spec).is_valid());
        assert!(check_lemma1_shortcut(&spec).applies);
    }
}

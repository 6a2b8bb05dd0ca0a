//! The two four-node counterexamples.
//!
//! Costs are `½(x_i - θ_i)²` with `θ = (1, 0, 0, 1)` on the path `0 - 1 - 2 - 3`.
//! The first couples only the end nodes (`x_0 + x_3 = 1`) and has no local
//! constraints. The second couples all four nodes (`Σ x_i = 1`) with
//! `x_i ∈ [0, 1]`. Both have the optimum `(½, 0, 0, ½)`, and pairwise
//! methods started at `(0, 0, 0, 1)` never leave it.

use nalgebra::{DMatrix, DVector};

use crate::model::{Constraint, Cost, Graph, InstanceKind, NodeLocal, ProblemSpec};

pub const THETA: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
/// Starting point at which pairwise methods stall.
pub const STALL_POINT: [f64; 4] = [0.0, 0.0, 0.0, 1.0];
pub const OPTIMUM: [f64; 4] = [0.5, 0.0, 0.0, 0.5];
pub const OPTIMAL_VALUE: f64 = 0.25;
/// Barrier weight used for the second example unless overridden.
pub const DEFAULT_RHO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    One,
    Two,
}

pub fn example_problem(which: Which, add_edge_14: bool) -> ProblemSpec {
    let mut graph = Graph::line(4);
    if add_edge_14 {
        graph.add_edge(0, 3).expect("valid edge");
    }
    let (coupling, boxed): ([f64; 4], bool) = match which {
        Which::One => ([1.0, 0.0, 0.0, 1.0], false),
        Which::Two => ([1.0; 4], true),
    };
    let nodes = THETA
        .iter()
        .zip(coupling)
        .map(|(&t, a)| {
            let constraints = if boxed {
                vec![Constraint::lower_bound(1, 0, 0.0), Constraint::upper_bound(1, 0, 1.0)]
            } else {
                Vec::new()
            };
            NodeLocal::new(Cost::half_squared_distance(&[t]), DMatrix::from_element(1, 1, a), constraints)
                .expect("consistent dimensions")
        })
        .collect();
    let name = match which {
        Which::One => "example1",
        Which::Two => "example2",
    };
    let mut spec = ProblemSpec::new(graph, nodes, DVector::from_element(1, 1.0), DEFAULT_RHO)
        .with_name(if add_edge_14 { format!("{name}+edge14") } else { name.to_string() })
        .with_kind(InstanceKind::Generic);
    spec.f_lower = Some(0.0);
    if boxed {
        spec.beta = Some(0.0);
        spec.beta1 = Some(1.0);
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate_objective, Allocation};
    use crate::reachability::check_reachability;
    use approx::assert_relative_eq;

    #[test]
    fn optimum_value() {
        for which in [Which::One, Which::Two] {
            let spec = example_problem(which, false);
            let x = Allocation::from_scalars(&spec, &OPTIMUM).unwrap();
            assert!(x.residual_inf() == 0.0);
            let f: f64 = spec.nodes.iter().zip(x.blocks()).map(|(n, xi)| n.cost.value(xi)).sum();
            assert_relative_eq!(f, OPTIMAL_VALUE);
        }
    }

    #[test]
    fn first_example_is_not_reachable_without_extra_edge() {
        assert!(!check_reachability(&example_problem(Which::One, false)).holds);
        assert!(check_reachability(&example_problem(Which::One, true)).holds);
    }

    #[test]
    fn stall_point_is_feasible() {
        let spec = example_problem(Which::One, false);
        let x = Allocation::from_scalars(&spec, &STALL_POINT).unwrap();
        assert_eq!(x.residual_inf(), 0.0);
        assert_relative_eq!(evaluate_objective(&spec, &x).unwrap().total, 0.5);
    }
}

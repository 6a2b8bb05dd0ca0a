//! Problem instances, allocations and objective evaluation.

pub mod graph;
pub mod oracle;
pub mod problem;

pub use graph::Graph;
pub use oracle::{Constraint, ConstraintOracle, Cost, CostOracle};
pub use problem::{
    coupling_residual, evaluate_objective, objective_gradient, surrogate_value, validate_problem, Allocation,
    InstanceKind, NodeLocal, ObjectiveValue, ProblemSpec, ValidationReport, FEASIBILITY_TOL, INTERIOR_TOL,
};

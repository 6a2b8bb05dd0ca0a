//! Distributed feasible method for resource allocation over networks.
//!
//! Nodes share a coupling constraint `Σ A_i x_i = c` and keep private local
//! sets `{g_i(x_i) <= 0}`. Each round, every node solves a small barrier
//! subproblem over its closed neighborhood and the proposals are merged so
//! that every iterate stays feasible.
//!
//! ```
//! use dfm::benchmarks::examples::{example_problem, Which};
//! use dfm::engine::{run, StoppingRule};
//! use dfm::model::Allocation;
//!
//! let spec = example_problem(Which::One, true);
//! let x0 = Allocation::from_scalars(&spec, &[0.0, 0.0, 0.0, 1.0]).unwrap();
//! let trace = run(&spec, &x0, StoppingRule::rounds(500)).unwrap();
//! let x = trace.final_state.stacked();
//! assert!((x[0] - 0.5).abs() < 1e-6 && (x[3] - 0.5).abs() < 1e-6);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod baselines;
pub mod benchmarks;
pub mod centralized;
pub mod cli;
pub mod engine;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod local_solver;
pub mod model;
pub mod qp;
pub mod reachability;
pub mod trace;

pub use error::{DfmError, Result};

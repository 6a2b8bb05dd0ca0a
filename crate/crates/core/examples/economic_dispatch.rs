//! Economic dispatch on a MATPOWER-style case.
//!
//! ```text
//! cargo run --release --example economic_dispatch -- data/synthetic118.m
//! cargo run --release --example economic_dispatch -- data/sample5.m 700
//! ```
//!
//! The optional second argument is the demand in MW.

use std::env;
use std::fs;

use dfm::benchmarks::dispatch::{case_units, default_demand, gen_economic_dispatch};
use dfm::benchmarks::init::feasible_initialization;
use dfm::benchmarks::matpower::parse_matpower_case;
use dfm::centralized::{solve_barrier_problem, CentralizedOptions};
use dfm::engine::{Engine, EngineOptions, StoppingRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/synthetic118.m".into());
    let case = parse_matpower_case(&fs::read_to_string(&path)?)?;
    let units = case_units(&case);
    let demand = match args.next() {
        Some(d) => d.parse()?,
        None => default_demand(&units),
    };
    let spec = gen_economic_dispatch(&case, demand)?;
    println!(
        "{path}: {} generators, {} communication links, demand {demand:.1} MW, rho {:e}",
        spec.node_count(),
        spec.graph.edge_count(),
        spec.rho
    );

    let x0 = feasible_initialization(&spec)?;
    let options = EngineOptions {
        threads: 4,
        ..EngineOptions::default()
    };
    let trace = Engine::new(&spec, options)?.run(&x0, StoppingRule::rounds(5000))?;
    for r in trace.records.iter().filter(|r| r.round.is_power_of_two() || r.round == 0) {
        println!(
            "round {:>5}  F = {:.6}  |grad|_W^2 = {:.3e}  |Ax - c| = {:.1e}",
            r.round,
            r.total,
            r.grad_w_sq.unwrap_or(f64::NAN),
            r.coupling_residual
        );
    }
    let reference = solve_barrier_problem(&spec, spec.rho, &x0, &CentralizedOptions::default())?;
    println!(
        "stopped after {} rounds ({:?}); F = {:.9}, centralized F* = {:.9}",
        trace.rounds(),
        trace.stop_reason,
        trace.last().total,
        reference.objective.total
    );
    Ok(())
}

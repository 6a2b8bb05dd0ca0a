//! Two-resource sharing: every user draws renewable and coal power, and
//! generators can go negative down to their capacity.
//!
//! Run with `cargo run --release --example multi_resource -- 30 7`
//! (user count and seed).

use std::env;

use dfm::benchmarks::init::feasible_initialization;
use dfm::benchmarks::multi_resource::{random_multi_resource, toy_multi_resource};
use dfm::engine::{Engine, EngineOptions, StoppingRule};
use dfm::model::ProblemSpec;

fn solve(spec: &ProblemSpec) -> dfm::Result<()> {
    let x0 = feasible_initialization(spec)?;
    let trace = Engine::new(spec, EngineOptions::default())?.run(&x0, StoppingRule::rounds(3000))?;
    let (residual, margin) = trace.worst_feasibility();
    println!(
        "{} users: F {:.6} -> {:.6} in {} rounds; worst |Ax - c| {residual:.1e}, worst margin {margin:.2e}",
        spec.node_count(),
        trace.records[0].total,
        trace.last().total,
        trace.rounds()
    );
    Ok(())
}

fn main() -> dfm::Result<()> {
    let mut args = env::args().skip(1);
    let n = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let toy = toy_multi_resource();
    solve(&toy)?;
    let x = feasible_initialization(&toy)?;
    let trace = Engine::new(&toy, EngineOptions::default())?.run(&x, StoppingRule::rounds(3000))?;
    for (i, b) in trace.final_state.blocks().iter().enumerate() {
        println!("  user {i}: renewable {:+.4}, coal {:+.4}", b[0], b[1]);
    }

    solve(&random_multi_resource(n, seed)?)
}

//! Pairwise exchanges stall on the two four-node examples; neighborhood
//! rounds do not once the graph lets the end nodes talk.
//!
//! Run with `cargo run --example counterexamples`.

use dfm::benchmarks::examples::{example_problem, Which, OPTIMUM, STALL_POINT};
use dfm::benchmarks::init::feasible_initialization;
use dfm::engine::{Engine, EngineOptions, Method, StoppingRule};
use dfm::model::Allocation;

fn show(x: &Allocation) -> String {
    let v: Vec<String> = x.stacked().iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", v.join(", "))
}

fn main() -> dfm::Result<()> {
    println!("target optimum {OPTIMUM:?}\n");

    for (which, method) in [(Which::One, Method::Naive), (Which::Two, Method::NaiveConstrained)] {
        let spec = example_problem(which, false);
        let x0 = Allocation::from_scalars(&spec, &STALL_POINT)?;
        let options = EngineOptions {
            method,
            ..EngineOptions::default()
        };
        let trace = Engine::new(&spec, options)?.run(&x0, StoppingRule::rounds(100))?;
        println!(
            "{:<16} {:?}: {} -> {} ({:?} after {} rounds)",
            spec.name,
            method,
            show(&x0),
            show(&trace.final_state),
            trace.stop_reason,
            trace.rounds()
        );
    }
    println!();

    for which in [Which::One, Which::Two] {
        let spec = example_problem(which, true);
        let x0 = match Allocation::from_scalars(&spec, &STALL_POINT)? {
            x if x.is_interior() => x,
            _ => feasible_initialization(&spec)?,
        };
        let trace = Engine::new(&spec, EngineOptions::default())?.run(&x0, StoppingRule::rounds(500))?;
        let last = trace.last();
        println!(
            "{:<16} Dfm: {} -> {} in {} rounds, f = {:.6}, rhoB = {:.2e}",
            spec.name,
            show(&x0),
            show(&trace.final_state),
            trace.rounds(),
            last.f,
            last.rho_barrier
        );
    }
    Ok(())
}

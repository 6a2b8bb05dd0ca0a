//! How the barrier weight trades accuracy for distance from the boundary.
//!
//! Run with `cargo run --example rho_sweep`.

use dfm::benchmarks::examples::{example_problem, Which, OPTIMAL_VALUE};
use dfm::benchmarks::init::feasible_initialization;
use dfm::benchmarks::rho::rho_for_spec;
use dfm::engine::{Engine, EngineOptions, StoppingRule};

fn main() -> dfm::Result<()> {
    let base = example_problem(Which::Two, true);
    let x0 = feasible_initialization(&base)?;

    println!("{:>10} {:>8} {:>12} {:>12} {:>10}", "rho", "rounds", "f - f*", "min x_i", "margin");
    for rho in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
        let spec = base.clone().with_rho(rho);
        let trace = Engine::new(&spec, EngineOptions::default())?.run(&x0, StoppingRule::rounds(20_000))?;
        let x = trace.final_state.stacked();
        println!(
            "{rho:>10.0e} {:>8} {:>12.3e} {:>12.3e} {:>10.2e}",
            trace.rounds(),
            trace.last().f - OPTIMAL_VALUE,
            x.min(),
            trace.last().interior_margin
        );
    }

    for eps in [0.1, 0.01, 0.001] {
        let rho = rho_for_spec(&base, eps, &x0)?;
        let spec = base.clone().with_rho(rho);
        let trace = Engine::new(&spec, EngineOptions::default())?.run(&x0, StoppingRule::rounds(20_000))?;
        println!(
            "epsilon {eps:<6} -> rho {rho:.3e}, f - f* = {:.3e}",
            trace.last().f - OPTIMAL_VALUE
        );
    }
    Ok(())
}

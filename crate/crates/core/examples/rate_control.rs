//! Rate control with sigmoid utilities on a chain of links. The utilities
//! are not concave, so this only promises a stationary point.
//!
//! Run with `cargo run --example rate_control`.

use dfm::benchmarks::init::feasible_initialization;
use dfm::benchmarks::rate_control::{gen_rate_control, random_utilities, RateNetwork};
use dfm::engine::{Engine, EngineOptions, StoppingRule};

fn main() -> dfm::Result<()> {
    let net = RateNetwork::four_source_chain();
    let utilities = random_utilities(&net, 0);
    let spec = gen_rate_control(&net, &utilities)?;

    let x0 = feasible_initialization(&spec)?;
    let trace = Engine::new(&spec, EngineOptions::default())?.run(&x0, StoppingRule::rounds(2000))?;
    println!("stopped after {} rounds ({:?})", trace.rounds(), trace.stop_reason);
    println!("total utility {:.6}", -trace.last().f);

    let x = &trace.final_state;
    for (s, u) in utilities.iter().enumerate() {
        let block = x.block(s);
        let shares: Vec<String> = net
            .route(s)
            .iter()
            .zip(block.iter().skip(1))
            .map(|(l, y)| format!("link {l}: {y:.4}"))
            .collect();
        println!(
            "source {s}: rate {:.4} (sigmoid midpoint {:.3}), {}",
            block[0],
            u.b,
            shares.join(", ")
        );
    }
    for (l, cap) in net.capacities().iter().enumerate() {
        let used: f64 = net
            .transmitters_on(l)
            .into_iter()
            .map(|s| {
                let k = net.route(s).iter().position(|&m| m == l).unwrap();
                x.block(s)[1 + k]
            })
            .sum();
        println!("link {l}: {used:.6} of {cap}");
    }
    Ok(())
}

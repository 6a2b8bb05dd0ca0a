//! Whether neighborhood moves span every direction that keeps the coupling
//! constraint, on a few graphs and coupling structures.
//!
//! Run with `cargo run --example reachability`.

use dfm::benchmarks::examples::{example_problem, Which};
use dfm::engine::step_sizes;
use dfm::model::{Cost, Graph, NodeLocal, ProblemSpec};
use dfm::reachability::{check_lemma1_shortcut, check_reachability, weighting_matrix};
use nalgebra::DVector;

/// Nodes agree on a common value: `A_i` is column `i` of the Laplacian.
fn consensus(graph: Graph) -> dfm::Result<ProblemSpec> {
    let lap = graph.laplacian();
    let n = graph.node_count();
    let nodes = (0..n)
        .map(|i| NodeLocal::new(Cost::half_squared_distance(&[i as f64]), lap.columns(i, 1).into_owned(), vec![]))
        .collect::<dfm::Result<Vec<_>>>()?;
    Ok(ProblemSpec::new(graph, nodes, DVector::zeros(n), 1.0))
}

fn report(label: &str, spec: &ProblemSpec) -> dfm::Result<()> {
    let r = check_reachability(spec);
    let w = weighting_matrix(spec, &step_sizes(&spec.graph))?;
    println!(
        "{label:<28} {:<6} dim sum {:>2} / dim null {:>2}  lambda_W {}  shortcut: {}",
        if r.holds { "holds" } else { "fails" },
        r.dim_sum,
        r.dim_null,
        w.lambda_min_nonzero.map_or("-".into(), |l| format!("{l:.4}")),
        check_lemma1_shortcut(spec).reason
    );
    Ok(())
}

fn main() -> dfm::Result<()> {
    report("example 1 on a path", &example_problem(Which::One, false))?;
    report("example 1 plus edge {1,4}", &example_problem(Which::One, true))?;
    report("example 2 on a path", &example_problem(Which::Two, false))?;
    report("consensus on a path", &consensus(Graph::line(5))?)?;
    report("consensus on a star", &consensus(Graph::star(5, 0))?)?;
    report("consensus on a complete graph", &consensus(Graph::complete(5))?)?;
    Ok(())
}

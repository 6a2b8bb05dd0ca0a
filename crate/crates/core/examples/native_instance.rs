//! Build an instance in code, save it in the native JSON format, load it
//! back and solve it. The saved file also works with `dfm run --instance`.
//!
//! Run with `cargo run --example native_instance -- /tmp/three_zones.json`.

use std::env;
use std::path::PathBuf;

use dfm::engine::{run, StoppingRule};
use dfm::instance::{load_instance, write_instance, InstanceFile};
use dfm::model::{Allocation, Constraint, Cost, Graph, NodeLocal, ProblemSpec};
use nalgebra::{DMatrix, DVector};

fn main() -> dfm::Result<()> {
    let path = env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| env::temp_dir().join("three_zones.json"));

    // Three zones split 2 units of heat and 1 unit of cooling; each zone
    // keeps its total draw under a cap.
    let targets = [[1.2, 0.1], [0.4, 0.6], [0.6, 0.5]];
    let caps = [1.5, 1.0, 1.2];
    let nodes = targets
        .iter()
        .zip(caps)
        .map(|(t, cap)| {
            NodeLocal::new(
                Cost::half_squared_distance(t),
                DMatrix::identity(2, 2),
                vec![
                    Constraint::lower_bound(2, 0, 0.0),
                    Constraint::lower_bound(2, 1, 0.0),
                    Constraint::half_space(DVector::from_row_slice(&[1.0, 1.0]), cap),
                ],
            )
        })
        .collect::<dfm::Result<Vec<_>>>()?;
    let mut spec = ProblemSpec::new(Graph::line(3), nodes, DVector::from_row_slice(&[2.0, 1.0]), 1e-3)
        .with_name("three-zones");
    spec.f_lower = Some(0.0);

    let mut file = InstanceFile::from_spec(&spec)?;
    file.initial = Some(vec![vec![0.8, 0.4], vec![0.5, 0.2], vec![0.7, 0.4]]);
    write_instance(&path, &file)?;
    println!("wrote {}", path.display());

    let loaded = load_instance(&path)?;
    let spec = loaded.to_spec()?;
    let start: Vec<DVector<f64>> = loaded
        .initial
        .expect("saved above")
        .into_iter()
        .map(DVector::from_vec)
        .collect();
    let x0 = Allocation::new(&spec, start)?;
    let trace = run(&spec, &x0, StoppingRule::rounds(2000))?;
    println!("{} rounds, f = {:.6}", trace.rounds(), trace.last().f);
    for (i, b) in trace.final_state.blocks().iter().enumerate() {
        println!("zone {i}: heat {:.4}, cooling {:.4}, total {:.4} of {}", b[0], b[1], b[0] + b[1], caps[i]);
    }
    Ok(())
}

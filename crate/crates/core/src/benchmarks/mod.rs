//! Instance generators for the motivating applications and the
//! counterexamples, plus feasible initialization and barrier-weight selection.

pub mod dispatch;
pub mod examples;
pub mod init;
pub mod matpower;
pub mod multi_resource;
pub mod rate_control;
pub mod rho;

use rand::Rng;

use crate::model::Graph;

/// Connected random graph: a random spanning tree plus `extra` random edges.
pub fn random_connected_graph(n: usize, extra: usize, rng: &mut impl Rng) -> Graph {
    let mut g = Graph::empty(n);
    for v in 1..n {
        let u = rng.random_range(0..v);
        g.add_edge(u, v).expect("tree edge in range");
    }
    if n >= 2 {
        for _ in 0..extra {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                g.add_edge(a, b).expect("edge in range");
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_graphs_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..20 {
            assert!(random_connected_graph(n, n / 2, &mut rng).is_connected());
        }
    }
}

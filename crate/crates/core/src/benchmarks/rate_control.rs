//! Rate control with sigmoidal utilities.
//!
//! Link capacity inequalities `Σ_{i ∈ T_ℓ} x_i <= c_ℓ` become equalities by
//! giving every transmitter a share `y_iℓ` of each link on its route, with
//! `x_i <= y_iℓ` and `Σ_i y_iℓ = c_ℓ`. Transmitter `i` owns the block
//! `(x_i, y_iℓ for ℓ on its route)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DfmError, Result};
use crate::model::{Constraint, Cost, Graph, InstanceKind, NodeLocal, ProblemSpec};

pub const DEFAULT_RHO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct RateNetwork {
    capacities: Vec<f64>,
    routes: Vec<Vec<usize>>,
}

impl RateNetwork {
    pub fn new(capacities: Vec<f64>, routes: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(l) = capacities.iter().position(|&c| !(c > 0.0)) {
            return Err(DfmError::InvalidProblem(format!("link {l} has non-positive capacity")));
        }
        let mut used = vec![false; capacities.len()];
        let mut routes = routes;
        for (i, r) in routes.iter_mut().enumerate() {
            if r.is_empty() {
                return Err(DfmError::InvalidProblem(format!("transmitter {i} has an empty route")));
            }
            r.sort_unstable();
            r.dedup();
            for &l in r.iter() {
                if l >= capacities.len() {
                    return Err(DfmError::InvalidProblem(format!("transmitter {i} uses unknown link {l}")));
                }
                used[l] = true;
            }
        }
        if let Some(l) = used.iter().position(|u| !u) {
            return Err(DfmError::InvalidProblem(format!("link {l} carries no transmitter")));
        }
        Ok(RateNetwork { capacities, routes })
    }

    /// Chain of `capacities.len() + 1` sources where link `k` is shared by
    /// sources `k` and `k + 1`.
    pub fn chain(capacities: &[f64]) -> Result<Self> {
        let n = capacities.len() + 1;
        let routes = (0..n)
            .map(|s| {
                let mut r = Vec::new();
                if s > 0 {
                    r.push(s - 1);
                }
                if s < capacities.len() {
                    r.push(s);
                }
                r
            })
            .collect();
        Self::new(capacities.to_vec(), routes)
    }

    /// The four-source chain used by the command-line front end.
    pub fn four_source_chain() -> Self {
        Self::chain(&[2.0, 1.5, 1.0]).expect("valid chain")
    }

    pub fn link_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn transmitter_count(&self) -> usize {
        self.routes.len()
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    pub fn route(&self, i: usize) -> &[usize] {
        &self.routes[i]
    }

    pub fn transmitters_on(&self, link: usize) -> Vec<usize> {
        (0..self.routes.len()).filter(|&i| self.routes[i].contains(&link)).collect()
    }

    /// Transmitters are neighbors when their routes share a link.
    pub fn shared_link_graph(&self) -> Graph {
        let mut g = Graph::empty(self.routes.len());
        for l in 0..self.capacities.len() {
            let users = self.transmitters_on(l);
            for (k, &i) in users.iter().enumerate() {
                for &j in &users[k + 1..] {
                    g.add_edge(i, j).expect("distinct transmitters");
                }
            }
        }
        g
    }
}

/// `U(x) = p / (1 + exp(-a (x - b))) + q` with `q` chosen so that `U(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidUtility {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

/// Draws `a ∈ [0.5, 2]`, `b ∈ [0.2, 0.8] · c_min(route)`, `p ∈ [1, 3]`.
pub fn random_utilities(net: &RateNetwork, seed: u64) -> Vec<SigmoidUtility> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..net.transmitter_count())
        .map(|i| {
            let cmin = net.route(i).iter().map(|&l| net.capacities[l]).fold(f64::INFINITY, f64::min);
            SigmoidUtility {
                a: rng.random_range(0.5..=2.0),
                b: rng.random_range(0.2..=0.8) * cmin,
                p: rng.random_range(1.0..=3.0),
            }
        })
        .collect()
}

pub fn gen_rate_control(net: &RateNetwork, utilities: &[SigmoidUtility]) -> Result<ProblemSpec> {
    if utilities.len() != net.transmitter_count() {
        return Err(DfmError::DimensionMismatch(format!(
            "{} utilities for {} transmitters",
            utilities.len(),
            net.transmitter_count()
        )));
    }
    let m = net.link_count();
    let mut nodes = Vec::with_capacity(utilities.len());
    let mut f_lower = 0.0;
    for (i, u) in utilities.iter().enumerate() {
        if !(u.a > 0.0 && u.b > 0.0 && u.p > 0.0) {
            return Err(DfmError::InvalidProblem(format!("utility {i} needs positive a, b, p")));
        }
        let route = net.route(i);
        let dim = 1 + route.len();
        let mut coupling = DMatrix::zeros(m, dim);
        let mut constraints = vec![Constraint::lower_bound(dim, 0, 0.0)];
        for (k, &l) in route.iter().enumerate() {
            coupling[(l, 1 + k)] = 1.0;
            let mut normal = DVector::zeros(dim);
            normal[0] = 1.0;
            normal[1 + k] = -1.0;
            constraints.push(Constraint::half_space(normal, 0.0));
        }
        let cost = Cost::neg_sigmoid(dim, 0, u.a, u.b, u.p);
        f_lower += cost.global_infimum().expect("sigmoid infimum is closed form");
        nodes.push(NodeLocal::new(cost, coupling, constraints)?);
    }
    let mut spec = ProblemSpec::new(
        net.shared_link_graph(),
        nodes,
        DVector::from_column_slice(net.capacities()),
        DEFAULT_RHO,
    )
    .with_name("rate-control")
    .with_kind(InstanceKind::RateControl);
    spec.beta = Some(0.0);
    spec.beta1 = Some(std::f64::consts::SQRT_2);
    spec.f_lower = Some(f_lower);
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::oracle::sigmoid_zero_offset;
    use crate::model::validate_problem;
    use crate::reachability::{check_lemma1_shortcut, check_reachability};
    use approx::assert_relative_eq;

    #[test]
    fn single_link_structure() {
        let net = RateNetwork::new(vec![1.0], vec![vec![0], vec![0]]).unwrap();
        let spec = gen_rate_control(&net, &[SigmoidUtility { a: 1.0, b: 0.5, p: 1.0 }; 2]).unwrap();
        assert_eq!(spec.coupling_rows(), 1);
        for node in &spec.nodes {
            assert_eq!(node.dim, 2);
            assert_eq!(node.coupling, DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
            // x >= 0 and x <= y.
            assert_eq!(node.constraints.len(), 2);
            let at = DVector::from_vec(vec![0.6, 0.5]);
            assert!(node.constraints[1].value(&at) > 0.0);
        }
        assert_eq!(spec.rhs[0], 1.0);
    }

    #[test]
    fn zero_utility_offset() {
        assert_relative_eq!(sigmoid_zero_offset(1.0, 0.0, 2.0), -1.0);
    }

    #[test]
    fn four_source_chain_is_a_path() {
        let net = RateNetwork::four_source_chain();
        let g = net.shared_link_graph();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
        let spec = gen_rate_control(&net, &random_utilities(&net, 1)).unwrap();
        assert!(validate_problem(&spec).is_valid());
        assert!(check_lemma1_shortcut(&spec).applies);
        assert!(check_reachability(&spec).holds);
    }

    #[test]
    fn invalid_networks() {
        assert!(RateNetwork::new(vec![1.0], vec![vec![]]).is_err());
        assert!(RateNetwork::new(vec![0.0], vec![vec![0]]).is_err());
        assert!(RateNetwork::new(vec![1.0, 1.0], vec![vec![0]]).is_err());
    }
}

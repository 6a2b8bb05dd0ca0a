//! Reference computations shared by the integration tests.
//!
//! Everything here is written against plain formulas and nalgebra so it does
//! not lean on the solver code it is used to check.

#![allow(dead_code)]

use dfm::benchmarks::dispatch::GeneratorUnit;
use dfm::model::Graph;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded units with `c2 ∈ [0.5, 2]`, `c1 ∈ [-1, 1]` and ranges of width 1 to 3.
pub fn random_units(n: usize, seed: u64) -> Vec<GeneratorUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let pmin = rng.random_range(0.0..1.0);
            GeneratorUnit {
                c2: rng.random_range(0.5..2.0),
                c1: rng.random_range(-1.0..1.0),
                c0: 0.0,
                pmin,
                pmax: pmin + rng.random_range(1.0..3.0),
            }
        })
        .collect()
}

/// Bisection down to adjacent floats for an increasing function on `(lo, hi)`.
fn bisect_increasing(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Widens `[lo, hi]` until `f(lo) <= target <= f(hi)`.
fn bracket(target: f64, f: &impl Fn(f64) -> f64) -> (f64, f64) {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) > target {
        lo *= 2.0;
    }
    while f(hi) < target {
        hi *= 2.0;
    }
    (lo, hi)
}

/// `d/dP [c2 P² + c1 P + ρ (1/(P - pmin) + 1/(pmax - P))]`.
pub fn barrier_marginal(u: &GeneratorUnit, rho: f64, p: f64) -> f64 {
    2.0 * u.c2 * p + u.c1 + rho * (-1.0 / (p - u.pmin).powi(2) + 1.0 / (u.pmax - p).powi(2))
}

pub fn barrier_objective(units: &[GeneratorUnit], rho: f64, p: &[f64]) -> f64 {
    units
        .iter()
        .zip(p)
        .map(|(u, &x)| u.cost(x) + rho * (1.0 / (x - u.pmin) + 1.0 / (u.pmax - x)))
        .sum()
}

pub fn cost_objective(units: &[GeneratorUnit], p: &[f64]) -> f64 {
    units.iter().zip(p).map(|(u, &x)| u.cost(x)).sum()
}

/// Minimizer and value of the barrier dispatch problem, by nested bisection
/// on the common marginal price.
pub fn dispatch_barrier_optimum(units: &[GeneratorUnit], demand: f64, rho: f64) -> (Vec<f64>, f64) {
    let response = |lambda: f64| -> Vec<f64> {
        units
            .iter()
            .map(|u| bisect_increasing(u.pmin, u.pmax, lambda, |p| barrier_marginal(u, rho, p)))
            .collect()
    };
    let total = |lambda: f64| response(lambda).iter().sum::<f64>();
    let (lo, hi) = bracket(demand, &total);
    let lambda = bisect_increasing(lo, hi, demand, total);
    let p = response(lambda);
    let value = barrier_objective(units, rho, &p);
    (p, value)
}

/// Minimizer and value of the dispatch problem without a barrier.
pub fn dispatch_optimum(units: &[GeneratorUnit], demand: f64) -> (Vec<f64>, f64) {
    let response = |lambda: f64| -> Vec<f64> {
        units
            .iter()
            .map(|u| ((lambda - u.c1) / (2.0 * u.c2)).clamp(u.pmin, u.pmax))
            .collect()
    };
    let total = |lambda: f64| response(lambda).iter().sum::<f64>();
    let (lo, hi) = bracket(demand, &total);
    let lambda = bisect_increasing(lo, hi, demand, total);
    let p = response(lambda);
    let value = cost_objective(units, &p);
    (p, value)
}

/// Projector onto `{p supported on N̄_i, Σ p = 0}` for scalar nodes with unit coupling.
pub fn scalar_neighborhood_projector(graph: &Graph, i: usize) -> DMatrix<f64> {
    let n = graph.node_count();
    let hood = graph.closed_neighborhood(i);
    let size = hood.len() as f64;
    let mut p = DMatrix::zeros(n, n);
    for &a in &hood {
        for &b in &hood {
            p[(a, b)] = if a == b { 1.0 - 1.0 / size } else { -1.0 / size };
        }
    }
    p
}

/// `η_i = 1 / max_{j ∈ N̄_i} |N̄_j|`.
pub fn reference_step_sizes(graph: &Graph) -> Vec<f64> {
    (0..graph.node_count())
        .map(|i| {
            let widest = graph
                .closed_neighborhood(i)
                .into_iter()
                .map(|j| graph.closed_neighborhood(j).len())
                .max()
                .unwrap();
            1.0 / widest as f64
        })
        .collect()
}

/// Weighting matrix for scalar nodes with unit coupling.
pub fn scalar_weighting(graph: &Graph) -> DMatrix<f64> {
    let eta = reference_step_sizes(graph);
    let n = graph.node_count();
    let mut w = DMatrix::zeros(n, n);
    for (i, e) in eta.iter().enumerate() {
        w += scalar_neighborhood_projector(graph, i) * *e;
    }
    w
}

/// Smallest eigenvalue of a symmetric matrix above `floor`.
pub fn smallest_positive_eigenvalue(m: &DMatrix<f64>, floor: f64) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v > floor)
        .fold(f64::INFINITY, f64::min)
}

/// `x - (1/L) H ∇f(x)` with `H = Σ η_i H^i`, where `H^i` is the centering
/// matrix of `N̄_i` padded with zeros (diagonal included).
pub fn weighted_gradient_step(graph: &Graph, x: &DVector<f64>, grad: &DVector<f64>, l: f64) -> DVector<f64> {
    let eta = reference_step_sizes(graph);
    let n = graph.node_count();
    let mut h = DMatrix::zeros(n, n);
    for (i, e) in eta.iter().enumerate() {
        let hood = graph.closed_neighborhood(i);
        let size = hood.len() as f64;
        for j in 0..n {
            for k in 0..n {
                let entry = if !hood.contains(&j) || !hood.contains(&k) {
                    0.0
                } else if j == k {
                    1.0 - 1.0 / size
                } else {
                    -1.0 / size
                };
                h[(j, k)] += e * entry;
            }
        }
    }
    x - h * grad / l
}

/// `Aᵀ(AAᵀ)⁻¹` for a full-row-rank `A`.
pub fn right_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = a * a.transpose();
    a.transpose() * gram.try_inverse().expect("full row rank")
}

/// Orthogonal projection of `r` onto the null space of a full-row-rank `A`.
pub fn project_to_null(a: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    r - right_inverse(a) * (a * r)
}

/// Splits `p ∈ Null(A)` into `q_1 + … + q_n` with each `q_i` supported on
/// `N̄_i` and inside `Null(A)`. Needs every block full row rank and a
/// connected graph.
///
/// Each `p_i` is split into its row-space part `u_i` and null-space part
/// `v_i`. The row-space images `y_i = A_i u_i` sum to zero, so they are
/// the Laplacian image of some `z`, and block `j` of `q_i` carries
/// `A_j^† [L]_ji z_i`.
pub fn neighborhood_decomposition(graph: &Graph, blocks: &[DMatrix<f64>], p: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = blocks.len();
    let m = blocks[0].nrows();
    let dims: Vec<usize> = blocks.iter().map(|a| a.ncols()).collect();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let total: usize = dims.iter().sum();
    let pinvs: Vec<DMatrix<f64>> = blocks.iter().map(right_inverse).collect();

    let mut y = DVector::zeros(n * m);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let pi = p.rows(offsets[i], dims[i]).into_owned();
        let ui = &pinvs[i] * (&blocks[i] * &pi);
        y.rows_mut(i * m, m).copy_from(&(&blocks[i] * &ui));
        v.push(pi - ui);
    }

    let lap = graph.laplacian();
    let kron = lap.kronecker(&DMatrix::<f64>::identity(m, m));
    let z = kron.pseudo_inverse(1e-12).expect("svd converges") * y;

    (0..n)
        .map(|i| {
            let zi = z.rows(i * m, m).into_owned();
            let mut q = DVector::zeros(total);
            for j in graph.closed_neighborhood(i) {
                let mut block = &pinvs[j] * (&zi * lap[(j, i)]);
                if j == i {
                    block += &v[i];
                }
                q.rows_mut(offsets[j], dims[j]).copy_from(&block);
            }
            q
        })
        .collect()
}

pub fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

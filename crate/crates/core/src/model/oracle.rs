//! Cost and constraint oracles.
//!
//! Built-in families carry closed-form gradients, Hessians and smoothness
//! constants. Anything else goes through [`CostOracle`] / [`ConstraintOracle`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// User-supplied cost callback. Must be pure.
pub trait CostOracle: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// User-supplied convex constraint `g(x) <= 0`. Must be pure.
///
/// Without a Hessian the barrier curvature falls back to the Gauss-Newton
/// term and the local solver relies on its line search.
pub trait ConstraintOracle: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Clone)]
pub enum Cost {
    /// `½ xᵀQx + linearᵀx + constant`.
    Quadratic {
        q: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
    },
    /// Negated sigmoid utility acting on one coordinate:
    /// `-(p / (1 + exp(-a (x[coord] - b))) + offset)`.
    NegSigmoid {
        dim: usize,
        coord: usize,
        a: f64,
        b: f64,
        p: f64,
        offset: f64,
    },
    Custom(Arc<dyn CostOracle>),
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Quadratic { q, linear, constant } => f
                .debug_struct("Quadratic")
                .field("q", &q.as_slice())
                .field("linear", &linear.as_slice())
                .field("constant", constant)
                .finish(),
            Cost::NegSigmoid { dim, coord, a, b, p, offset } => f
                .debug_struct("NegSigmoid")
                .field("dim", dim)
                .field("coord", coord)
                .field("a", a)
                .field("b", b)
                .field("p", p)
                .field("offset", offset)
                .finish(),
            Cost::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Cost {
    /// Scalar generator cost `c2 x² + c1 x + c0`.
    pub fn scalar_quadratic(c2: f64, c1: f64, c0: f64) -> Self {
        Cost::Quadratic {
            q: DMatrix::from_element(1, 1, 2.0 * c2),
            linear: DVector::from_element(1, c1),
            constant: c0,
        }
    }

    /// `½‖x - θ‖²`.
    pub fn half_squared_distance(theta: &[f64]) -> Self {
        let d = theta.len();
        let t = DVector::from_column_slice(theta);
        Cost::Quadratic {
            q: DMatrix::identity(d, d),
            linear: -t.clone(),
            constant: 0.5 * t.norm_squared(),
        }
    }

    /// Two-resource disutility `α(r + c - D)² + β c²` on `x = (r, c)`.
    pub fn multi_resource(alpha: f64, beta: f64, demand: f64) -> Self {
        let q = DMatrix::from_row_slice(
            2,
            2,
            &[2.0 * alpha, 2.0 * alpha, 2.0 * alpha, 2.0 * (alpha + beta)],
        );
        Cost::Quadratic {
            q,
            linear: DVector::from_vec(vec![-2.0 * alpha * demand, -2.0 * alpha * demand]),
            constant: alpha * demand * demand,
        }
    }

    /// Negated sigmoid utility with the offset chosen so that `U(0) = 0`.
    pub fn neg_sigmoid(dim: usize, coord: usize, a: f64, b: f64, p: f64) -> Self {
        Cost::NegSigmoid {
            dim,
            coord,
            a,
            b,
            p,
            offset: sigmoid_zero_offset(a, b, p),
        }
    }

    pub fn custom(oracle: impl CostOracle + 'static) -> Self {
        Cost::Custom(Arc::new(oracle))
    }

    /// Input dimension, when the family fixes it.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Cost::Quadratic { q, .. } => Some(q.nrows()),
            Cost::NegSigmoid { dim, .. } => Some(*dim),
            Cost::Custom(_) => None,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Cost::Quadratic { q, linear, constant } => 0.5 * x.dot(&(q * x)) + linear.dot(x) + constant,
            Cost::NegSigmoid { coord, a, b, p, offset, .. } => {
                -(p * logistic(a * (x[*coord] - b)) + offset)
            }
            Cost::Custom(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Cost::Quadratic { q, linear, .. } => q * x + linear,
            Cost::NegSigmoid { dim, coord, a, b, p, .. } => {
                let s = logistic(a * (x[*coord] - b));
                let mut g = DVector::zeros(*dim);
                g[*coord] = -p * a * s * (1.0 - s);
                g
            }
            Cost::Custom(o) => o.gradient(x),
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            Cost::Quadratic { q, .. } => Some(q.clone()),
            Cost::NegSigmoid { dim, coord, a, b, p, .. } => {
                let s = logistic(a * (x[*coord] - b));
                let mut h = DMatrix::zeros(*dim, *dim);
                h[(*coord, *coord)] = -p * a * a * s * (1.0 - s) * (1.0 - 2.0 * s);
                Some(h)
            }
            Cost::Custom(o) => o.hessian(x),
        }
    }

    /// Analytic smoothness constant for the built-in families.
    ///
    /// For the sigmoid family this is the conservative envelope `p a² / 4`.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            Cost::Quadratic { q, .. } => {
                let ev = linalg::symmetric_eigenvalues(&symmetrize(q));
                Some(ev.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            }
            Cost::NegSigmoid { a, p, .. } => Some(p * a * a / 4.0),
            Cost::Custom(_) => None,
        }
    }

    /// Strong-convexity modulus for quadratic costs (smallest eigenvalue of Q),
    /// `None` when not strongly convex or unknown.
    pub fn strong_convexity(&self) -> Option<f64> {
        match self {
            Cost::Quadratic { q, .. } => {
                let ev = linalg::symmetric_eigenvalues(&symmetrize(q));
                ev.first().copied().filter(|&s| s > 0.0)
            }
            _ => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Cost::Quadratic { q, .. } => {
                linalg::symmetric_eigenvalues(&symmetrize(q)).first().is_none_or(|&s| s >= -1e-12)
            }
            _ => false,
        }
    }

    /// Infimum over all of `R^d` when available in closed form.
    pub fn global_infimum(&self) -> Option<f64> {
        match self {
            Cost::Quadratic { q, linear, constant } => {
                let qs = symmetrize(q);
                if !self.is_convex() {
                    return None;
                }
                let pinv = linalg::pinv(&qs);
                let x = -(&pinv * linear);
                // Unbounded below unless the linear term lies in range(Q).
                let resid = &qs * &x + linear;
                if linalg::max_abs(&resid) > 1e-9 * (1.0 + linalg::max_abs(linear)) {
                    return None;
                }
                Some(0.5 * x.dot(&(&qs * &x)) + linear.dot(&x) + constant)
            }
            Cost::NegSigmoid { p, offset, .. } => Some(-(p + offset)),
            Cost::Custom(_) => None,
        }
    }
}

fn symmetrize(q: &DMatrix<f64>) -> DMatrix<f64> {
    (q + q.transpose()) * 0.5
}

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Offset `q` making `p / (1 + exp(a b)) + q = 0`.
pub fn sigmoid_zero_offset(a: f64, b: f64, p: f64) -> f64 {
    -p * logistic(-a * b)
}

#[derive(Clone)]
pub enum Constraint {
    /// `normalᵀx + offset <= 0`.
    Affine { normal: DVector<f64>, offset: f64 },
    /// `½ xᵀQx + normalᵀx + offset <= 0` with `Q` positive semidefinite.
    Quadratic {
        q: DMatrix<f64>,
        normal: DVector<f64>,
        offset: f64,
    },
    Custom(Arc<dyn ConstraintOracle>),
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Affine { normal, offset } => f
                .debug_struct("Affine")
                .field("normal", &normal.as_slice())
                .field("offset", offset)
                .finish(),
            Constraint::Quadratic { q, normal, offset } => f
                .debug_struct("Quadratic")
                .field("q", &q.as_slice())
                .field("normal", &normal.as_slice())
                .field("offset", offset)
                .finish(),
            Constraint::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Constraint {
    /// `x[coord] >= bound`, i.e. `bound - x[coord] <= 0`.
    pub fn lower_bound(dim: usize, coord: usize, bound: f64) -> Self {
        let mut normal = DVector::zeros(dim);
        normal[coord] = -1.0;
        Constraint::Affine { normal, offset: bound }
    }

    /// `x[coord] <= bound`.
    pub fn upper_bound(dim: usize, coord: usize, bound: f64) -> Self {
        let mut normal = DVector::zeros(dim);
        normal[coord] = 1.0;
        Constraint::Affine { normal, offset: -bound }
    }

    /// `normalᵀx <= rhs`.
    pub fn half_space(normal: DVector<f64>, rhs: f64) -> Self {
        Constraint::Affine { normal, offset: -rhs }
    }

    pub fn custom(oracle: impl ConstraintOracle + 'static) -> Self {
        Constraint::Custom(Arc::new(oracle))
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Constraint::Affine { normal, .. } | Constraint::Quadratic { normal, .. } => Some(normal.len()),
            Constraint::Custom(_) => None,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Constraint::Affine { .. })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Constraint::Affine { normal, offset } => normal.dot(x) + offset,
            Constraint::Quadratic { q, normal, offset } => 0.5 * x.dot(&(q * x)) + normal.dot(x) + offset,
            Constraint::Custom(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Constraint::Affine { normal, .. } => normal.clone(),
            Constraint::Quadratic { q, normal, .. } => q * x + normal,
            Constraint::Custom(o) => o.gradient(x),
        }
    }

    /// Hessian of `g`; `None` for custom constraints without one.
    pub fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        match self {
            Constraint::Affine { normal, .. } => Some(DMatrix::zeros(normal.len(), normal.len())),
            Constraint::Quadratic { q, .. } => Some(q.clone()),
            Constraint::Custom(o) => o.hessian(x),
        }
    }
}

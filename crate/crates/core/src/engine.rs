//! Synchronous round engine.
//!
//! Every round, each owner solves its neighborhood subproblem against the same
//! snapshot; the proposals are then merged with the step sizes
//! `η_j = 1 / max_{ℓ ∈ N̄_j} |N̄_ℓ|`. Plans can be computed on a worker pool,
//! and the merge always runs in node order, so results do not depend on the
//! number of workers.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::baselines;
use crate::barrier;
use crate::error::{DfmError, Result};
use crate::local_solver::{solve_subproblem, ReallocationPlan, SubproblemOptions};
use crate::model::{evaluate_objective, objective_gradient, Allocation, Graph, ObjectiveValue, ProblemSpec};
use crate::reachability;
use crate::trace::{BoundCheck, RoundRecord, StopReason, Trace};

/// Coupling residual above which a round is rejected.
pub const ROUND_FEASIBILITY_TOL: f64 = 1e-8;
/// Largest stacked dimension for which the dense weighting matrix is built.
pub const DIAGNOSTICS_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub eta: Vec<f64>,
}

/// `η_j = 1 / max_{ℓ ∈ N̄_j} |N̄_ℓ|`.
pub fn step_sizes(graph: &Graph) -> StepSizes {
    let eta = (0..graph.node_count())
        .map(|j| {
            let widest = graph
                .closed_neighborhood(j)
                .into_iter()
                .map(|l| graph.closed_degree(l))
                .max()
                .unwrap_or(1);
            1.0 / widest as f64
        })
        .collect();
    StepSizes { eta }
}

impl StepSizes {
    /// Largest `Σ_{j ∈ N̄_i} η_j` over all nodes; at most one by construction.
    pub fn max_neighborhood_sum(&self, graph: &Graph) -> f64 {
        (0..graph.node_count())
            .map(|i| graph.closed_neighborhood(i).iter().map(|&j| self.eta[j]).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Update rule applied each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Dfm,
    /// Pairwise edge exchanges with coupling only.
    Naive,
    /// Pairwise edge exchanges that also respect the local constraints.
    NaiveConstrained,
}

impl Method {
    /// Whether iterates are required to be strictly interior.
    pub fn uses_barrier(self) -> bool {
        matches!(self, Method::Dfm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub max_rounds: usize,
    /// Stop once `‖∇F‖²_W` falls to this value.
    pub grad_w_sq_tol: f64,
    /// Used instead of the gradient metric when `W` is unavailable.
    pub descent_tol: f64,
}

impl StoppingRule {
    pub fn rounds(max_rounds: usize) -> Self {
        StoppingRule {
            max_rounds,
            ..Self::default()
        }
    }

    /// Only the round cap; the metric thresholds are disabled.
    pub fn exact_rounds(max_rounds: usize) -> Self {
        StoppingRule {
            max_rounds,
            grad_w_sq_tol: -1.0,
            descent_tol: -1.0,
        }
    }
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            max_rounds: 1000,
            grad_w_sq_tol: 1e-12,
            descent_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub method: Method,
    pub subproblem: SubproblemOptions,
    /// Propagate subproblem failures instead of applying the best plan found.
    pub strict: bool,
    pub threads: usize,
    /// Build the weighting matrix for the gradient metric (when `N` is small enough).
    pub diagnostics: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            method: Method::Dfm,
            subproblem: SubproblemOptions::default(),
            strict: true,
            threads: 1,
            diagnostics: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub next: Allocation,
    pub plans: Vec<ReallocationPlan>,
}

/// One synchronous round with default subproblem options, single-threaded.
pub fn dfm_round(spec: &ProblemSpec, state: &Allocation, eta: &StepSizes) -> Result<RoundOutcome> {
    Engine::new(spec, EngineOptions::default())?.round(state, eta, 0)
}

/// Runs the method from `x0` with default options.
pub fn run(spec: &ProblemSpec, x0: &Allocation, stop: StoppingRule) -> Result<Trace> {
    Engine::new(spec, EngineOptions::default())?.run(x0, stop)
}

/// `∇F(x)ᵀ W ∇F(x)`.
pub fn kkt_metric(spec: &ProblemSpec, x: &Allocation, w: &DMatrix<f64>) -> Result<f64> {
    let g = objective_gradient(spec, x)?;
    Ok(weighted_norm_sq(w, &g))
}

fn weighted_norm_sq(w: &DMatrix<f64>, g: &DVector<f64>) -> f64 {
    g.dot(&(w * g))
}

pub struct Engine<'a> {
    spec: &'a ProblemSpec,
    options: EngineOptions,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Engine<'a> {
    pub fn new(spec: &'a ProblemSpec, options: EngineOptions) -> Result<Self> {
        let report = crate::model::validate_problem(spec);
        if !report.is_valid() {
            return Err(DfmError::InvalidProblem(report.violations.join("; ")));
        }
        let pool = if options.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(options.threads)
                    .build()
                    .map_err(|e| DfmError::InvalidArgument(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Engine { spec, options, pool })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    fn objective(&self, x: &Allocation) -> Result<ObjectiveValue> {
        if self.options.method.uses_barrier() {
            evaluate_objective(self.spec, x)
        } else {
            let f: f64 = self
                .spec
                .nodes
                .iter()
                .zip(x.blocks())
                .map(|(n, xi)| n.cost.value(xi))
                .sum();
            Ok(ObjectiveValue { f, barrier: 0.0, total: f })
        }
    }

    fn gradient(&self, x: &Allocation) -> Result<DVector<f64>> {
        if self.options.method.uses_barrier() {
            objective_gradient(self.spec, x)
        } else {
            let mut g = DVector::zeros(self.spec.total_dim());
            for ((node, xi), off) in self.spec.nodes.iter().zip(x.blocks()).zip(self.spec.offsets()) {
                g.rows_mut(off, node.dim).copy_from(&node.cost.gradient(xi));
            }
            Ok(g)
        }
    }

    fn check_start(&self, x0: &Allocation) -> Result<()> {
        if x0.residual_inf() > ROUND_FEASIBILITY_TOL {
            return Err(DfmError::InfeasibleStart(format!(
                "coupling residual {:e} exceeds {ROUND_FEASIBILITY_TOL:e}",
                x0.residual_inf()
            )));
        }
        let margin = x0.interior_margin();
        let ok = if self.options.method.uses_barrier() { margin < 0.0 } else { margin <= 0.0 };
        if !ok {
            return Err(DfmError::InfeasibleStart(format!("interior margin {margin:e} is not negative")));
        }
        Ok(())
    }

    fn check_round(&self, round: usize, x: &Allocation) -> Result<()> {
        let margin = x.interior_margin();
        let ok = if self.options.method.uses_barrier() { margin < 0.0 } else { margin <= 1e-12 };
        if x.residual_inf() > ROUND_FEASIBILITY_TOL || !ok {
            return Err(DfmError::FeasibilityViolated {
                round,
                residual: x.residual_inf(),
                margin,
            });
        }
        Ok(())
    }

    fn solve_one(&self, owner: usize, state: &Allocation) -> Result<ReallocationPlan> {
        match solve_subproblem(self.spec, owner, state, &self.options.subproblem) {
            Err(DfmError::SubproblemNotConverged { best, .. }) if !self.options.strict => Ok(*best),
            other => other,
        }
    }

    fn plans(&self, state: &Allocation) -> Result<Vec<ReallocationPlan>> {
        let n = self.spec.node_count();
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(|i| self.solve_one(i, state)).collect()),
            None => (0..n).map(|i| self.solve_one(i, state)).collect(),
        }
    }

    /// One round of the configured method. `round` is only used in error reports.
    pub fn round(&self, state: &Allocation, eta: &StepSizes, round: usize) -> Result<RoundOutcome> {
        let outcome = match self.options.method {
            Method::Dfm => {
                let plans = self.plans(state)?;
                let graph = &self.spec.graph;
                let blocks = (0..self.spec.node_count())
                    .map(|i| {
                        let mut xi = state.block(i).clone();
                        for j in graph.closed_neighborhood(i) {
                            if let Some(p) = plans[j].delta_for(i) {
                                xi.axpy(eta.eta[j], p, 1.0);
                            }
                        }
                        xi
                    })
                    .collect();
                RoundOutcome {
                    next: Allocation::new(self.spec, blocks)?,
                    plans,
                }
            }
            Method::Naive | Method::NaiveConstrained => {
                let weights = baselines::EdgeWeights::default_for(&self.spec.graph);
                let constrained = self.options.method == Method::NaiveConstrained;
                RoundOutcome {
                    next: baselines::pairwise_update(self.spec, state, &weights, constrained)?,
                    plans: Vec::new(),
                }
            }
        };
        self.check_round(round + 1, &outcome.next)?;
        Ok(outcome)
    }

    /// Weighting matrix and `λ_W`, when enabled and small enough.
    fn weighting(&self, eta: &StepSizes) -> Option<(DMatrix<f64>, Option<f64>)> {
        if !self.options.diagnostics || self.spec.total_dim() > DIAGNOSTICS_CAP {
            return None;
        }
        reachability::weighting_matrix(self.spec, eta)
            .ok()
            .map(|w| (w.matrix, w.lambda_min_nonzero))
    }

    fn bound_inputs(&self, f0: f64) -> Option<(f64, f64, f64)> {
        if !self.options.method.uses_barrier() {
            return None;
        }
        let spec = self.spec;
        let f_lower = spec.f_lower?;
        let cost_l = spec.max_smoothness();
        let gap = f0 - f_lower;
        let lb = if spec.has_barriers() {
            barrier::smoothness_constant_lb(gap, spec.rho, spec.beta?, spec.beta1?, spec.max_constraints()).ok()?
        } else {
            0.0
        };
        Some((f_lower, lb, cost_l))
    }

    pub fn run(&self, x0: &Allocation, stop: StoppingRule) -> Result<Trace> {
        self.check_start(x0)?;
        let start = Instant::now();
        let eta = step_sizes(&self.spec.graph);
        let weighting = self.weighting(&eta);
        let metric = |x: &Allocation| -> Result<Option<f64>> {
            match &weighting {
                Some((w, _)) => Ok(Some(weighted_norm_sq(w, &self.gradient(x)?))),
                None => Ok(None),
            }
        };

        let mut state = x0.clone();
        let mut value = self.objective(&state)?;
        let mut grad_w = metric(&state)?;
        let mut records = vec![record(0, &value, self.spec.rho, grad_w, &state, None, &start)];

        let mut bound = self.bound_inputs(value.total).map(|(f_lower, lb, l)| {
            let effective = l + self.spec.rho * lb;
            BoundCheck {
                f_lower,
                level: (value.total - f_lower) / self.spec.rho,
                barrier_smoothness: lb,
                cost_smoothness: l,
                effective_smoothness: effective,
                worst_descent_slack: f64::NEG_INFINITY,
                descent_violations: 0,
                gradient_sum: 0.0,
                gradient_sum_bound: 2.0 * effective * (value.total - f_lower),
                sum_exceeded: false,
            }
        });
        if weighting.is_none() {
            bound = None;
        }

        let mut monotonicity_violations = 0;
        let mut stop_reason = StopReason::RoundCap;
        let mut k = 0;
        loop {
            if let Some(g) = grad_w {
                if g <= stop.grad_w_sq_tol {
                    stop_reason = StopReason::GradientThreshold;
                    break;
                }
            }
            if k >= stop.max_rounds {
                break;
            }
            let outcome = self.round(&state, &eta, k)?;
            let next_value = self.objective(&outcome.next)?;
            let descent = value.total - next_value.total;
            if descent < -1e-10 {
                monotonicity_violations += 1;
            }
            if let (Some(b), Some(g)) = (bound.as_mut(), grad_w) {
                let slack = -descent + g / (2.0 * b.effective_smoothness);
                b.worst_descent_slack = b.worst_descent_slack.max(slack);
                if slack > 1e-8 {
                    b.descent_violations += 1;
                }
                b.gradient_sum += g;
                if b.gradient_sum > b.gradient_sum_bound {
                    b.sum_exceeded = true;
                }
            }
            let fixed = outcome.next == state;
            state = outcome.next;
            value = next_value;
            k += 1;
            grad_w = metric(&state)?;
            records.push(record(k, &value, self.spec.rho, grad_w, &state, Some(descent), &start));
            if fixed {
                stop_reason = StopReason::FixedPoint;
                break;
            }
            if grad_w.is_none() && descent.abs() <= stop.descent_tol {
                stop_reason = StopReason::DescentThreshold;
                break;
            }
        }

        Ok(Trace {
            records,
            final_state: state,
            stop_reason,
            bound_check: bound,
            monotonicity_violations,
            lambda_w: weighting.and_then(|(_, l)| l),
        })
    }
}

fn record(
    round: usize,
    value: &ObjectiveValue,
    rho: f64,
    grad_w_sq: Option<f64>,
    x: &Allocation,
    descent: Option<f64>,
    start: &Instant,
) -> RoundRecord {
    RoundRecord {
        round,
        total: value.total,
        f: value.f,
        rho_barrier: rho * value.barrier,
        grad_w_sq,
        coupling_residual: x.residual_inf(),
        interior_margin: x.interior_margin(),
        descent,
        ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::model::Allocation;

pub const CSV_HEADER: &str = "round,F,f,rhoB,grad_W_sq,coupling_residual,interior_margin,descent,ms";

/// Metrics recorded after round `round` (round 0 is the starting point).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    #[serde(rename = "F")]
    pub total: f64,
    pub f: f64,
    #[serde(rename = "rhoB")]
    pub rho_barrier: f64,
    /// `∇F(x)ᵀ W ∇F(x)`, absent when the weighting matrix is not available.
    pub grad_w_sq: Option<f64>,
    /// `‖Ax - c‖∞`.
    pub coupling_residual: f64,
    pub interior_margin: f64,
    /// `F(x^{k-1}) - F(x^k)`; absent for round 0.
    pub descent: Option<f64>,
    /// Elapsed wall time since the start of the run.
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    RoundCap,
    GradientThreshold,
    DescentThreshold,
    FixedPoint,
}

/// Runtime check of the per-round descent inequality and the telescoped
/// gradient bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub f_lower: f64,
    /// `M = (F(x⁰) - f̲) / ρ`.
    pub level: f64,
    pub barrier_smoothness: f64,
    pub cost_smoothness: f64,
    /// `L + ρ L_B`.
    pub effective_smoothness: f64,
    /// Largest `F(x^{k+1}) - F(x^k) + ‖∇F(x^k)‖²_W / (2(L + ρL_B))` seen.
    pub worst_descent_slack: f64,
    pub descent_violations: usize,
    pub gradient_sum: f64,
    /// `2 (ρ L_B + L) (F(x⁰) - f̲)`.
    pub gradient_sum_bound: f64,
    pub sum_exceeded: bool,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.descent_violations == 0 && !self.sum_exceeded
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<RoundRecord>,
    pub final_state: Allocation,
    pub stop_reason: StopReason,
    pub bound_check: Option<BoundCheck>,
    /// Rounds where `F` increased by more than `1e-10`.
    pub monotonicity_violations: usize,
    /// Smallest nonzero eigenvalue of the weighting matrix, if computed.
    pub lambda_w: Option<f64>,
}

impl Trace {
    pub fn rounds(&self) -> usize {
        self.records.last().map_or(0, |r| r.round)
    }

    pub fn last(&self) -> &RoundRecord {
        self.records.last().expect("trace always holds round 0")
    }

    /// Worst coupling residual and worst interior margin over all records.
    pub fn worst_feasibility(&self) -> (f64, f64) {
        self.records.iter().fold((0.0_f64, f64::NEG_INFINITY), |(r, m), rec| {
            (r.max(rec.coupling_residual), m.max(rec.interior_margin))
        })
    }

    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let ms = if include_timing { r.ms } else { 0.0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.round,
                num(r.total),
                num(r.f),
                num(r.rho_barrier),
                opt(r.grad_w_sq),
                num(r.coupling_residual),
                num(r.interior_margin),
                opt(r.descent),
                num(ms)
            );
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write, include_timing: bool) -> std::io::Result<()> {
        w.write_all(self.to_csv(include_timing).as_bytes())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

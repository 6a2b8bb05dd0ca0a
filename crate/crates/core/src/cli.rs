//! Command-line front end shared by the `dfm` binary and the tests.
//!
//! `dfm run` loads or generates an instance, runs a method and writes a CSV
//! trace plus a JSON summary. `dfm check` reports whether local moves can
//! reach every feasible point.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::benchmarks::dispatch::{default_demand, case_units, gen_economic_dispatch};
use crate::benchmarks::examples::{example_problem, Which, STALL_POINT};
use crate::benchmarks::init::feasible_initialization;
use crate::benchmarks::matpower::{parse_matpower_case, synthetic_case};
use crate::benchmarks::multi_resource::{random_multi_resource, toy_multi_resource};
use crate::benchmarks::rate_control::{gen_rate_control, random_utilities, RateNetwork};
use crate::benchmarks::rho::rho_for_spec;
use crate::centralized::{barrier_path, solve_barrier_problem, CentralizedOptions};
use crate::engine::{step_sizes, Engine, EngineOptions, Method, StoppingRule, DIAGNOSTICS_CAP};
use crate::error::{DfmError, Result};
use crate::instance::load_instance;
use crate::model::{Allocation, ProblemSpec};
use crate::reachability::{check_lemma1_shortcut, check_reachability, weighting_matrix, ReachabilityReport, ShortcutVerdict};
use crate::trace::{BoundCheck, StopReason, Trace};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DFM_OUT_DIR";

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const PARSE: i32 = 4;
    pub const INVALID_PROBLEM: i32 = 5;
    pub const INFEASIBLE_START: i32 = 6;
    pub const SOLVER: i32 = 7;
    pub const NOT_REACHABLE: i32 = 8;
}

pub fn exit_code(err: &DfmError) -> i32 {
    match err {
        DfmError::Io(_) => exit::IO,
        DfmError::Parse { .. } | DfmError::Json(_) | DfmError::NoCostData => exit::PARSE,
        DfmError::InvalidProblem(_) | DfmError::DimensionMismatch(_) | DfmError::Graph(_) => exit::INVALID_PROBLEM,
        DfmError::InfeasibleStart(_) | DfmError::NoStrictlyFeasiblePoint(_) => exit::INFEASIBLE_START,
        DfmError::SubproblemNotConverged { .. }
        | DfmError::FeasibilityViolated { .. }
        | DfmError::BarrierUndefined { .. }
        | DfmError::RankDeficientCoupling => exit::SOLVER,
        DfmError::InvalidArgument(_) | DfmError::WeightPrecondition(_) => exit::USAGE,
        DfmError::DiagnosticsUnavailable { .. } => exit::FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "dfm", version, about = "Distributed feasible method for resource allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a method and write a CSV trace and a JSON summary.
    Run(RunArgs),
    /// Report whether neighborhood moves span every feasible direction.
    Check(SourceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Example1,
    Example2,
    /// Synthetic 118-bus case with 54 generators.
    Dispatch,
    MultiResource,
    MultiResourceToy,
    /// Four sources on a three-link chain.
    RateControl,
}

#[derive(Debug, Clone, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).multiple(false).args(["builtin", "case", "instance"])))]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// MATPOWER-style case file, turned into an economic dispatch instance.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Native JSON instance.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Add the edge between the first and last node of the examples.
    #[arg(long)]
    pub add_edge_14: bool,
    /// Total demand for dispatch instances (default: 60 % of the way up the output range).
    #[arg(long)]
    pub demand: Option<f64>,
    /// Node count for the random multi-resource builtin.
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dfm,
    Naive,
    NaiveConstrained,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dfm => Method::Dfm,
            MethodArg::Naive => Method::Naive,
            MethodArg::NaiveConstrained => Method::NaiveConstrained,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value = "dfm")]
    pub method: MethodArg,
    /// Barrier weight.
    #[arg(long, conflicts_with_all = ["epsilon", "rho_list"])]
    pub rho: Option<f64>,
    /// Target accuracy; the barrier weight is derived from it.
    #[arg(long, conflicts_with = "rho_list")]
    pub epsilon: Option<f64>,
    /// Comma-separated barrier weights, one run each.
    #[arg(long, value_delimiter = ',')]
    pub rho_list: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    pub rounds: usize,
    /// Stop once the squared weighted gradient norm drops to this value.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Output directory (default: $DFM_OUT_DIR, then the current directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write zeros in the timing column so traces are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Builtin { which: Builtin, add_edge_14: bool, nodes: usize },
    Case { path: PathBuf, demand: Option<f64> },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhoChoice {
    /// Keep the weight stored with the instance.
    Default,
    Explicit(f64),
    Accuracy(f64),
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: InstanceSource,
    pub method: Method,
    pub rho: RhoChoice,
    pub stop: StoppingRule,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub timing: bool,
}

impl SourceArgs {
    pub fn instance_source(&self) -> InstanceSource {
        if let Some(path) = &self.case {
            InstanceSource::Case {
                path: path.clone(),
                demand: self.demand,
            }
        } else if let Some(path) = &self.instance {
            InstanceSource::File(path.clone())
        } else {
            InstanceSource::Builtin {
                which: self.builtin.expect("clap enforces one source"),
                add_edge_14: self.add_edge_14,
                nodes: self.nodes,
            }
        }
    }
}

impl RunArgs {
    pub fn config(&self) -> RunConfig {
        let rho = match (&self.rho, &self.epsilon, &self.rho_list) {
            (Some(r), _, _) => RhoChoice::Explicit(*r),
            (_, Some(e), _) => RhoChoice::Accuracy(*e),
            (_, _, Some(list)) => RhoChoice::Sweep(list.clone()),
            _ => RhoChoice::Default,
        };
        let out_dir = self
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        RunConfig {
            source: self.source.instance_source(),
            method: self.method.into(),
            rho,
            stop: StoppingRule {
                max_rounds: self.rounds,
                grad_w_sq_tol: self.tol,
                ..StoppingRule::default()
            },
            seed: self.source.seed,
            threads: self.threads,
            out_dir,
            timing: !self.no_timing,
        }
    }
}

/// An instance together with the starting point stored alongside it, if any.
pub struct LoadedInstance {
    pub spec: ProblemSpec,
    pub initial: Option<Allocation>,
    /// Builtin examples start where pairwise methods stall.
    pub prefers_stall_point: bool,
}

pub fn load(source: &InstanceSource, seed: u64) -> Result<LoadedInstance> {
    let plain = |spec| LoadedInstance {
        spec,
        initial: None,
        prefers_stall_point: false,
    };
    match source {
        InstanceSource::Builtin { which, add_edge_14, nodes } => match which {
            Builtin::Example1 | Builtin::Example2 => {
                let w = if *which == Builtin::Example1 { Which::One } else { Which::Two };
                Ok(LoadedInstance {
                    spec: example_problem(w, *add_edge_14),
                    initial: None,
                    prefers_stall_point: true,
                })
            }
            Builtin::Dispatch => {
                let case = synthetic_case(118, 54, seed)?;
                let demand = default_demand(&case_units(&case));
                Ok(plain(gen_economic_dispatch(&case, demand)?))
            }
            Builtin::MultiResource => Ok(plain(random_multi_resource(*nodes, seed)?)),
            Builtin::MultiResourceToy => Ok(plain(toy_multi_resource())),
            Builtin::RateControl => {
                let net = RateNetwork::four_source_chain();
                Ok(plain(gen_rate_control(&net, &random_utilities(&net, seed))?))
            }
        },
        InstanceSource::Case { path, demand } => {
            let case = parse_matpower_case(&fs::read_to_string(path)?)?;
            let demand = demand.unwrap_or_else(|| default_demand(&case_units(&case)));
            Ok(plain(gen_economic_dispatch(&case, demand)?))
        }
        InstanceSource::File(path) => {
            let file = load_instance(path)?;
            let spec = file.to_spec()?;
            let initial = match &file.initial {
                Some(blocks) => Some(Allocation::new(
                    &spec,
                    blocks.iter().map(|b| nalgebra::DVector::from_column_slice(b)).collect(),
                )?),
                None => None,
            };
            Ok(LoadedInstance {
                spec,
                initial,
                prefers_stall_point: false,
            })
        }
    }
}

fn starting_point(loaded: &LoadedInstance, method: Method) -> Result<Allocation> {
    if let Some(x) = &loaded.initial {
        return Ok(x.clone());
    }
    if loaded.prefers_stall_point {
        let x = Allocation::from_scalars(&loaded.spec, &STALL_POINT)?;
        let usable = if method.uses_barrier() { x.is_interior() } else { x.interior_margin() <= 0.0 };
        if usable {
            return Ok(x);
        }
    }
    feasible_initialization(&loaded.spec)
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveSummary {
    #[serde(rename = "F")]
    pub total: f64,
    pub f: f64,
    #[serde(rename = "rhoB")]
    pub rho_barrier: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub instance: String,
    pub method: String,
    pub rho: f64,
    pub rounds: usize,
    pub stop_reason: StopReason,
    pub initial_allocation: Vec<Vec<f64>>,
    pub final_allocation: Vec<Vec<f64>>,
    pub final_objective: ObjectiveSummary,
    /// Every recorded iterate satisfied the coupling and local constraints.
    pub feasible: bool,
    pub worst_coupling_residual: f64,
    pub worst_interior_margin: f64,
    pub monotonicity_violations: usize,
    pub reachability: Option<ReachabilityReport>,
    pub shortcut: ShortcutVerdict,
    pub lambda_w: Option<f64>,
    pub bound_check: Option<BoundCheck>,
    /// Objective at a centrally computed reference solution, when available.
    pub reference_objective: Option<f64>,
    pub stationary_at_non_optimal: bool,
    pub trace_file: String,
}

/// Result of one `run` invocation; sweeps produce one summary per weight.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub runs: Vec<RunSummary>,
    pub summary_file: PathBuf,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Dfm => "dfm",
        Method::Naive => "naive",
        Method::NaiveConstrained => "naive-constrained",
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Reference objective: the barrier optimum for the barrier method, the
/// plain optimum (barrier path down to a negligible weight) otherwise.
fn reference_objective(spec: &ProblemSpec, method: Method, x0: &Allocation) -> Option<f64> {
    if spec.total_dim() > DIAGNOSTICS_CAP || !spec.nodes.iter().all(|n| n.cost.is_convex()) {
        return None;
    }
    let start = if x0.is_interior() { x0.clone() } else { feasible_initialization(spec).ok()? };
    if method.uses_barrier() {
        solve_barrier_problem(spec, spec.rho, &start, &CentralizedOptions::default())
            .ok()
            .map(|s| s.objective.total)
    } else {
        barrier_path(spec, &start, 1e-14).ok().map(|s| s.objective.f)
    }
}

fn run_one(loaded: &LoadedInstance, config: &RunConfig, rho: f64, tag: &str) -> Result<(RunSummary, Trace)> {
    let spec = loaded.spec.clone().with_rho(rho);
    let x0 = starting_point(loaded, config.method)?;
    let engine = Engine::new(
        &spec,
        EngineOptions {
            method: config.method,
            threads: config.threads,
            ..EngineOptions::default()
        },
    )?;
    let trace = engine.run(&x0, config.stop)?;

    let last = trace.last();
    let (worst_residual, worst_margin) = trace.worst_feasibility();
    let feasible = worst_residual <= crate::engine::ROUND_FEASIBILITY_TOL
        && if config.method.uses_barrier() { worst_margin < 0.0 } else { worst_margin <= 1e-12 };
    let reachability = (spec.total_dim() <= DIAGNOSTICS_CAP).then(|| check_reachability(&spec));
    let reference = reference_objective(&spec, config.method, &x0);
    let achieved = if config.method.uses_barrier() { last.total } else { last.f };
    let stalled = trace.stop_reason != StopReason::RoundCap || last.descent == Some(0.0);
    let stationary_at_non_optimal =
        stalled && reference.is_some_and(|r| achieved - r > 1e-6 * (1.0 + r.abs()));

    let trace_file = format!("{}_{}{}.csv", file_stem(&spec.name), method_name(config.method), tag);
    let summary = RunSummary {
        instance: spec.name.clone(),
        method: method_name(config.method).into(),
        rho,
        rounds: trace.rounds(),
        stop_reason: trace.stop_reason,
        initial_allocation: blocks_of(&x0),
        final_allocation: blocks_of(&trace.final_state),
        final_objective: ObjectiveSummary {
            total: last.total,
            f: last.f,
            rho_barrier: last.rho_barrier,
        },
        feasible,
        worst_coupling_residual: worst_residual,
        worst_interior_margin: worst_margin,
        monotonicity_violations: trace.monotonicity_violations,
        reachability,
        shortcut: check_lemma1_shortcut(&spec),
        lambda_w: trace.lambda_w,
        bound_check: trace.bound_check.clone(),
        reference_objective: reference,
        stationary_at_non_optimal,
        trace_file,
    };
    Ok((summary, trace))
}

fn blocks_of(x: &Allocation) -> Vec<Vec<f64>> {
    x.blocks().iter().map(|b| b.iter().copied().collect()).collect()
}

pub fn cmd_run(config: &RunConfig) -> Result<RunReport> {
    let loaded = load(&config.source, config.seed)?;
    let weights: Vec<(f64, String)> = match &config.rho {
        RhoChoice::Default => vec![(loaded.spec.rho, String::new())],
        RhoChoice::Explicit(r) => vec![(*r, String::new())],
        RhoChoice::Accuracy(eps) => {
            let reference = match &loaded.initial {
                Some(x) if x.is_interior() => x.clone(),
                _ => feasible_initialization(&loaded.spec)?,
            };
            vec![(rho_for_spec(&loaded.spec, *eps, &reference)?, String::new())]
        }
        RhoChoice::Sweep(list) => {
            if list.is_empty() {
                return Err(DfmError::InvalidArgument("empty barrier weight list".into()));
            }
            list.iter().enumerate().map(|(k, &r)| (r, format!("_rho{k}"))).collect()
        }
    };
    if let Some((bad, _)) = weights.iter().find(|(r, _)| !(*r > 0.0 && r.is_finite())) {
        return Err(DfmError::InvalidArgument(format!("barrier weight must be positive, got {bad}")));
    }

    fs::create_dir_all(&config.out_dir)?;
    let mut runs = Vec::with_capacity(weights.len());
    for (rho, tag) in &weights {
        let (summary, trace) = run_one(&loaded, config, *rho, tag)?;
        fs::write(config.out_dir.join(&summary.trace_file), trace.to_csv(config.timing))?;
        runs.push(summary);
    }
    let summary_file = config.out_dir.join(format!(
        "{}_{}.json",
        file_stem(&loaded.spec.name),
        method_name(config.method)
    ));
    let json = if runs.len() == 1 {
        serde_json::to_string_pretty(&runs[0])?
    } else {
        serde_json::to_string_pretty(&runs)?
    };
    fs::write(&summary_file, json + "\n")?;
    Ok(RunReport { runs, summary_file })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub instance: String,
    pub reachability: ReachabilityReport,
    pub shortcut: ShortcutVerdict,
    pub lambda_w: Option<f64>,
}

impl CheckReport {
    pub fn holds(&self) -> bool {
        self.reachability.holds
    }

    pub fn render(&self) -> String {
        let r = &self.reachability;
        let relation = match r.dim_sum.cmp(&r.dim_null) {
            std::cmp::Ordering::Less => "<",
            std::cmp::Ordering::Equal => "=",
            std::cmp::Ordering::Greater => ">",
        };
        let mut out = format!(
            "instance: {}\nreachability: {} (dim sum {} {} dim null {})\n",
            self.instance,
            if r.holds { "holds" } else { "fails" },
            r.dim_sum,
            relation,
            r.dim_null
        );
        if !r.subspaces_in_null {
            out.push_str("warning: a neighborhood subspace leaves the coupling null space\n");
        }
        out.push_str(&format!(
            "shortcut: {} ({})\n",
            if self.shortcut.applies { "applies" } else { "does not apply" },
            self.shortcut.reason
        ));
        match self.lambda_w {
            Some(l) => out.push_str(&format!("lambda_W: {l:.6e}\n")),
            None => out.push_str("lambda_W: unavailable\n"),
        }
        out
    }
}

pub fn cmd_check(source: &InstanceSource, seed: u64) -> Result<CheckReport> {
    let spec = load(source, seed)?.spec;
    let report = crate::model::validate_problem(&spec);
    if !report.is_valid() {
        return Err(DfmError::InvalidProblem(report.violations.join("; ")));
    }
    let shortcut = check_lemma1_shortcut(&spec);
    let reachability = check_reachability(&spec);
    let lambda_w = match weighting_matrix(&spec, &step_sizes(&spec.graph)) {
        Ok(w) => w.lambda_min_nonzero,
        Err(DfmError::DiagnosticsUnavailable { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CheckReport {
        instance: spec.name.clone(),
        reachability,
        shortcut,
        lambda_w,
    })
}

fn report_error(err: &DfmError) -> i32 {
    eprintln!("error: {err}");
    exit_code(err)
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => match cmd_run(&args.config()) {
            Ok(report) => {
                for run in &report.runs {
                    println!(
                        "{} {} rho={:e}: {} rounds, F={}, f={}, stop={:?}{}",
                        run.instance,
                        run.method,
                        run.rho,
                        run.rounds,
                        run.final_objective.total,
                        run.final_objective.f,
                        run.stop_reason,
                        if run.stationary_at_non_optimal { ", stationary at non-optimal point" } else { "" }
                    );
                }
                println!("summary: {}", report.summary_file.display());
                exit::SUCCESS
            }
            Err(e) => report_error(&e),
        },
        Command::Check(source) => match cmd_check(&source.instance_source(), source.seed) {
            Ok(report) => {
                print!("{}", report.render());
                if report.holds() {
                    exit::SUCCESS
                } else {
                    exit::NOT_REACHABLE
                }
            }
            Err(e) => report_error(&e),
        },
    }
}

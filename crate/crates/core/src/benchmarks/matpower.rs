//! Reader and writer for MATPOWER-style case files.
//!
//! Only the matrix-literal blocks `mpc.bus`, `mpc.gen`, `mpc.gencost` and
//! `mpc.branch` are read, plus the scalar `mpc.baseMVA`. Other blocks are skipped.
//! Column layouts follow the MATPOWER manual: the generator table holds the bus
//! in column 1, `PMAX` in column 9 and `PMIN` in column 10. A polynomial cost
//! row is `2 startup shutdown n c(n-1) ... c0`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DfmError, Result};
use crate::model::Graph;

#[derive(Debug, Clone, PartialEq)]
pub struct BusRecord {
    pub id: usize,
    pub kind: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenRecord {
    pub bus: usize,
    pub pmax: f64,
    pub pmin: f64,
    pub status: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenCost {
    pub model: u8,
    pub startup: f64,
    pub shutdown: f64,
    /// Coefficients, highest order first.
    pub coeffs: Vec<f64>,
}

impl GenCost {
    pub fn quadratic(c2: f64, c1: f64, c0: f64) -> Self {
        GenCost {
            model: 2,
            startup: 0.0,
            shutdown: 0.0,
            coeffs: vec![c2, c1, c0],
        }
    }

    /// `(c2, c1, c0)` when this is a polynomial cost of degree at most two.
    pub fn as_quadratic(&self) -> Option<(f64, f64, f64)> {
        if self.model != 2 || self.coeffs.len() < 3 {
            return None;
        }
        let k = self.coeffs.len();
        if self.coeffs[..k - 3].iter().any(|&c| c != 0.0) {
            return None;
        }
        Some((self.coeffs[k - 3], self.coeffs[k - 2], self.coeffs[k - 1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseData {
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub gens: Vec<GenRecord>,
    pub gencosts: Vec<GenCost>,
    pub branches: Vec<BranchRecord>,
    /// Rows that were read but rejected for dispatch.
    pub warnings: Vec<String>,
}

/// A generator that passed the cost and status filters.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchUnit {
    pub gen_index: usize,
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CaseData {
    /// In-service generators with a usable quadratic cost, in file order.
    pub fn dispatch_units(&self) -> Vec<DispatchUnit> {
        self.gens
            .iter()
            .zip(&self.gencosts)
            .enumerate()
            .filter(|(_, (g, _))| g.status > 0.0)
            .filter_map(|(k, (g, c))| {
                c.as_quadratic().map(|(c2, c1, c0)| DispatchUnit {
                    gen_index: k,
                    bus: g.bus,
                    pmin: g.pmin,
                    pmax: g.pmax,
                    c2,
                    c1,
                    c0,
                })
            })
            .collect()
    }

    /// Serializes in MATPOWER layout. Unused columns are written as zeros.
    pub fn to_matpower(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "function mpc = {name}");
        let _ = writeln!(s, "mpc.version = '2';");
        let _ = writeln!(s, "mpc.baseMVA = {};", self.base_mva);
        let _ = writeln!(s, "\n%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
        s.push_str("mpc.bus = [\n");
        for b in &self.buses {
            let _ = writeln!(s, "\t{}\t{}\t0\t0\t0\t0\t1\t1\t0\t138\t1\t1.06\t0.94;", b.id, b.kind);
        }
        s.push_str("];\n\n%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n");
        s.push_str("mpc.gen = [\n");
        for g in &self.gens {
            let _ = writeln!(s, "\t{}\t0\t0\t0\t0\t1\t100\t{}\t{}\t{};", g.bus, g.status, g.pmax, g.pmin);
        }
        s.push_str("];\n\n%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n");
        s.push_str("mpc.branch = [\n");
        for br in &self.branches {
            let _ = writeln!(s, "\t{}\t{}\t0\t0.1\t0\t0\t0\t0\t0\t0\t1\t-360\t360;", br.from, br.to);
        }
        s.push_str("];\n\n%% generator cost data\n%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0\n");
        s.push_str("mpc.gencost = [\n");
        for c in &self.gencosts {
            let _ = write!(s, "\t{}\t{}\t{}\t{}", c.model, c.startup, c.shutdown, c.coeffs.len());
            for v in &c.coeffs {
                let _ = write!(s, "\t{v}");
            }
            s.push_str(";\n");
        }
        s.push_str("];\n");
        s
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// `mpc.<name> = ...` → `(name, rest after '=')`.
fn block_header(line: &str) -> Option<(&str, &str)> {
    let rest = line.trim_start().strip_prefix("mpc.")?;
    let eq = rest.find('=')?;
    Some((rest[..eq].trim(), rest[eq + 1..].trim()))
}

struct RawBlock {
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| DfmError::Parse {
        line,
        message: format!("invalid number '{tok}'"),
    })
}

fn read_blocks(text: &str) -> Result<(HashMap<String, RawBlock>, Option<f64>)> {
    let mut blocks = HashMap::new();
    let mut base_mva = None;
    let mut current: Option<(String, usize, RawBlock, Vec<f64>, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw);
        let mut body = line;
        if current.is_none() {
            let Some((name, rest)) = block_header(line) else { continue };
            if let Some(inner) = rest.strip_prefix('[') {
                current = Some((name.to_string(), lineno, RawBlock { rows: Vec::new() }, Vec::new(), lineno));
                body = inner;
            } else {
                if name == "baseMVA" {
                    let v = rest.trim_end_matches(';').trim();
                    base_mva = Some(parse_number(v, lineno)?);
                }
                continue;
            }
        }
        let (_, _, block, row, row_line) = current.as_mut().expect("inside a block");
        let (content, closed) = match body.find(']') {
            Some(i) => {
                let tail = body[i + 1..].trim();
                if !(tail.is_empty() || tail == ";") {
                    return Err(DfmError::Parse {
                        line: lineno,
                        message: format!("unexpected text after ']': '{tail}'"),
                    });
                }
                (&body[..i], true)
            }
            None => (body, false),
        };
        let mut segments = content.split(';').peekable();
        while let Some(seg) = segments.next() {
            for tok in seg.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if row.is_empty() {
                    *row_line = lineno;
                }
                row.push(parse_number(tok, lineno)?);
            }
            if segments.peek().is_some() && !row.is_empty() {
                block.rows.push((*row_line, std::mem::take(row)));
            }
        }
        // A line break also ends a row.
        if !row.is_empty() {
            block.rows.push((*row_line, std::mem::take(row)));
        }
        if closed {
            let (name, _, block, _, _) = current.take().expect("inside a block");
            blocks.insert(name, block);
        }
    }
    if let Some((name, start, ..)) = current {
        return Err(DfmError::Parse {
            line: start,
            message: format!("block mpc.{name} is not terminated by '];'"),
        });
    }
    Ok((blocks, base_mva))
}

fn require_columns(name: &str, row: &[f64], line: usize, min: usize) -> Result<()> {
    if row.len() < min {
        return Err(DfmError::Parse {
            line,
            message: format!("mpc.{name} row has {} columns, expected at least {min}", row.len()),
        });
    }
    Ok(())
}

fn as_index(v: f64, line: usize, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(DfmError::Parse {
            line,
            message: format!("{what} must be a non-negative integer, got {v}"),
        })
    }
}

/// Parses a MATPOWER case.
///
/// Fails with [`DfmError::NoCostData`] when no generator has a usable
/// polynomial cost.
pub fn parse_matpower_case(text: &str) -> Result<CaseData> {
    let (mut blocks, base_mva) = read_blocks(text)?;
    let mut case = CaseData {
        base_mva: base_mva.unwrap_or(100.0),
        ..CaseData::default()
    };

    for (line, row) in blocks.remove("bus").map(|b| b.rows).unwrap_or_default() {
        require_columns("bus", &row, line, 2)?;
        case.buses.push(BusRecord {
            id: as_index(row[0], line, "bus id")?,
            kind: as_index(row[1], line, "bus type")? as u8,
        });
    }
    let known: BTreeSet<usize> = case.buses.iter().map(|b| b.id).collect();

    for (line, row) in blocks.remove("gen").map(|b| b.rows).unwrap_or_default() {
        require_columns("gen", &row, line, 10)?;
        let bus = as_index(row[0], line, "generator bus")?;
        if !known.contains(&bus) {
            return Err(DfmError::Parse {
                line,
                message: format!("generator references unknown bus {bus}"),
            });
        }
        case.gens.push(GenRecord {
            bus,
            status: row[7],
            pmax: row[8],
            pmin: row[9],
        });
    }

    for (line, row) in blocks.remove("branch").map(|b| b.rows).unwrap_or_default() {
        require_columns("branch", &row, line, 2)?;
        let from = as_index(row[0], line, "branch endpoint")?;
        let to = as_index(row[1], line, "branch endpoint")?;
        for b in [from, to] {
            if !known.contains(&b) {
                return Err(DfmError::Parse {
                    line,
                    message: format!("branch references unknown bus {b}"),
                });
            }
        }
        case.branches.push(BranchRecord { from, to });
    }

    let cost_rows = blocks.remove("gencost").map(|b| b.rows).unwrap_or_default();
    for (k, (line, row)) in cost_rows.into_iter().enumerate() {
        require_columns("gencost", &row, line, 4)?;
        let model = as_index(row[0], line, "cost model")? as u8;
        let n = as_index(row[3], line, "cost coefficient count")?;
        let coeffs: Vec<f64> = if model == 2 {
            require_columns("gencost", &row, line, 4 + n)?;
            row[4..4 + n].to_vec()
        } else {
            row[4..].to_vec()
        };
        let cost = GenCost {
            model,
            startup: row[1],
            shutdown: row[2],
            coeffs,
        };
        if k < case.gens.len() && cost.as_quadratic().is_none() {
            case.warnings.push(format!(
                "line {line}: gencost row {} rejected (model {model}, {n} coefficients); generator {} dropped",
                k + 1,
                k + 1
            ));
        }
        case.gencosts.push(cost);
    }
    if case.gencosts.len() < case.gens.len() && !case.gencosts.is_empty() {
        case.warnings.push(format!(
            "{} generators have no cost row and are dropped",
            case.gens.len() - case.gencosts.len()
        ));
    }
    if case.dispatch_units().is_empty() {
        return Err(DfmError::NoCostData);
    }
    Ok(case)
}

/// Communication graph on the dispatch units: two units are adjacent when a
/// branch path joins their buses whose interior buses host no generator.
/// Units on the same bus are always adjacent.
pub fn derive_generator_graph(case: &CaseData) -> Result<Graph> {
    let units = case.dispatch_units();
    let bus_index: BTreeMap<usize, usize> = case.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
    let nb = case.buses.len();
    let mut bus_graph = Graph::empty(nb);
    for br in &case.branches {
        let (a, b) = (bus_index[&br.from], bus_index[&br.to]);
        if a != b {
            bus_graph.add_edge(a, b)?;
        }
    }
    if !bus_graph.is_connected() {
        return Err(DfmError::Graph("branch graph is disconnected".into()));
    }
    let mut at_bus: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (u, unit) in units.iter().enumerate() {
        at_bus[bus_index[&unit.bus]].push(u);
    }

    let mut graph = Graph::empty(units.len());
    for (u, unit) in units.iter().enumerate() {
        let start = bus_index[&unit.bus];
        for &v in &at_bus[start] {
            if v != u {
                graph.add_edge(u, v)?;
            }
        }
        let mut seen = vec![false; nb];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(b) = queue.pop_front() {
            for &nbh in bus_graph.neighbors(b) {
                if seen[nbh] {
                    continue;
                }
                seen[nbh] = true;
                if at_bus[nbh].is_empty() {
                    queue.push_back(nbh);
                } else {
                    for &v in &at_bus[nbh] {
                        graph.add_edge(u, v)?;
                    }
                }
            }
        }
    }
    Ok(graph)
}

/// Seeded synthetic case: a random spanning tree over the buses plus a few
/// extra branches, generators on distinct buses, and quadratic costs.
pub fn synthetic_case(bus_count: usize, gen_count: usize, seed: u64) -> Result<CaseData> {
    if bus_count == 0 || gen_count == 0 || gen_count > bus_count {
        return Err(DfmError::InvalidArgument(format!(
            "need 1 <= generators <= buses, got {gen_count} generators on {bus_count} buses"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen_buses: Vec<usize> = (1..=bus_count).collect();
    for k in (1..gen_buses.len()).rev() {
        let j = rng.random_range(0..=k);
        gen_buses.swap(k, j);
    }
    gen_buses.truncate(gen_count);
    gen_buses.sort_unstable();

    let buses = (1..=bus_count)
        .map(|id| BusRecord {
            id,
            kind: if id == gen_buses[0] {
                3
            } else if gen_buses.binary_search(&id).is_ok() {
                2
            } else {
                1
            },
        })
        .collect();
    let mut branches = Vec::new();
    for id in 2..=bus_count {
        let parent = rng.random_range(1..id);
        branches.push(BranchRecord { from: parent, to: id });
    }
    for _ in 0..bus_count / 4 {
        let a = rng.random_range(1..=bus_count);
        let b = rng.random_range(1..=bus_count);
        if a != b {
            branches.push(BranchRecord { from: a.min(b), to: a.max(b) });
        }
    }
    let gens = gen_buses
        .iter()
        .map(|&bus| {
            let pmax = (rng.random_range(50.0..500.0_f64) / 10.0).round() * 10.0;
            let pmin = (rng.random_range(0.0..0.2_f64) * pmax).round();
            GenRecord {
                bus,
                pmax,
                pmin,
                status: 1.0,
            }
        })
        .collect();
    let gencosts = (0..gen_count)
        .map(|_| {
            let c2 = (rng.random_range(0.002..0.05_f64) * 1e4).round() / 1e4;
            let c1 = (rng.random_range(10.0..40.0_f64) * 100.0).round() / 100.0;
            GenCost::quadratic(c2, c1, 0.0)
        })
        .collect();
    Ok(CaseData {
        base_mva: 100.0,
        buses,
        gens,
        gencosts,
        branches,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
\t1\t3\t0;  % slack
\t2\t1\t0;
\t3\t2\t0;
];
mpc.gen = [
\t1\t0\t0\t0\t0\t1\t100\t1\t100\t0;
\t3\t0\t0\t0\t0\t1\t100\t1\t80\t10;
];
mpc.branch = [
\t1\t2;
\t2\t3;
];
mpc.gencost = [
\t2\t0\t0\t3\t0.01\t40\t0;
\t2\t0\t0\t3\t0.02\t30\t5;
];
";

    #[test]
    fn parses_polynomial_costs_and_limits() {
        let case = parse_matpower_case(SMALL).unwrap();
        assert_eq!(case.gencosts[0].as_quadratic(), Some((0.01, 40.0, 0.0)));
        assert_eq!(case.gens[0].pmax, 100.0);
        assert_eq!(case.gens[0].pmin, 0.0);
        assert_eq!(case.gens[1].pmin, 10.0);
        assert_eq!(case.dispatch_units().len(), 2);
        assert!(case.warnings.is_empty());
    }

    #[test]
    fn empty_cost_block_means_no_cost_data() {
        let text = SMALL.replace("\t2\t0\t0\t3\t0.01\t40\t0;\n\t2\t0\t0\t3\t0.02\t30\t5;\n", "");
        assert!(matches!(parse_matpower_case(&text), Err(DfmError::NoCostData)));
    }

    #[test]
    fn non_polynomial_rows_are_rejected_with_warning() {
        let text = SMALL.replace("\t2\t0\t0\t3\t0.02\t30\t5;", "\t1\t0\t0\t2\t0\t0\t50\t100;");
        let case = parse_matpower_case(&text).unwrap();
        assert_eq!(case.dispatch_units().len(), 1);
        assert_eq!(case.warnings.len(), 1);
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = SMALL.replace("0.01\t40", "0.01\tforty");
        match parse_matpower_case(&text) {
            Err(DfmError::Parse { line, .. }) => assert_eq!(line, 17),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unterminated_block_is_an_error() {
        let text = "mpc.bus = [\n1 3;\n";
        assert!(matches!(parse_matpower_case(text), Err(DfmError::Parse { line: 1, .. })));
    }

    #[test]
    fn single_line_block() {
        let text = "mpc.bus = [1 3; 2 1];\nmpc.gen = [1 0 0 0 0 1 100 1 50 0; 2 0 0 0 0 1 100 1 50 0];\nmpc.branch = [1 2];\nmpc.gencost = [2 0 0 3 1 0 0; 2 0 0 3 1 0 0];";
        let case = parse_matpower_case(text).unwrap();
        assert_eq!(case.buses.len(), 2);
        assert_eq!(case.gens.len(), 2);
    }

    fn case_from(buses: &[usize], gens_at: &[usize], branches: &[(usize, usize)]) -> CaseData {
        CaseData {
            base_mva: 100.0,
            buses: buses.iter().map(|&id| BusRecord { id, kind: 1 }).collect(),
            gens: gens_at
                .iter()
                .map(|&bus| GenRecord {
                    bus,
                    pmax: 1.0,
                    pmin: 0.0,
                    status: 1.0,
                })
                .collect(),
            gencosts: gens_at.iter().map(|_| GenCost::quadratic(1.0, 0.0, 0.0)).collect(),
            branches: branches.iter().map(|&(from, to)| BranchRecord { from, to }).collect(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn generators_joined_through_plain_bus() {
        let g = derive_generator_graph(&case_from(&[1, 2, 3], &[1, 3], &[(1, 2), (2, 3)])).unwrap();
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn generator_in_the_middle_blocks_paths() {
        let g = derive_generator_graph(&case_from(&[1, 2, 3], &[1, 2, 3], &[(1, 2), (2, 3)])).unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn adjacent_and_shared_buses() {
        let g = derive_generator_graph(&case_from(&[1, 2], &[1, 2, 2], &[(1, 2)])).unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn disconnected_branch_graph_is_an_error() {
        let err = derive_generator_graph(&case_from(&[1, 2, 3], &[1, 3], &[(1, 2)])).unwrap_err();
        assert!(matches!(err, DfmError::Graph(_)));
    }

    #[test]
    fn synthetic_round_trip() {
        let case = synthetic_case(30, 10, 7).unwrap();
        let text = case.to_matpower("synthetic30");
        let back = parse_matpower_case(&text).unwrap();
        assert_eq!(back, case);
        assert!(derive_generator_graph(&back).unwrap().is_connected());
    }
}

//! Native JSON instance format.
//!
//! ```json
//! {
//!   "name": "two-node",
//!   "rho": 0.01,
//!   "rhs": [1.0],
//!   "edges": [[0, 1]],
//!   "nodes": [
//!     {
//!       "cost": { "type": "quadratic", "q": [[1.0]], "linear": [-1.0] },
//!       "coupling": [[1.0]],
//!       "constraints": [{ "type": "affine", "normal": [-1.0], "offset": 0.0 }]
//!     },
//!     {
//!       "cost": { "type": "neg-sigmoid", "dim": 1, "coord": 0, "a": 1.0, "b": 0.5, "p": 2.0 },
//!       "coupling": [[1.0]]
//!     }
//!   ]
//! }
//! ```
//!
//! Matrices are lists of rows. Sigmoid offsets are recomputed on load so
//! that the utility vanishes at zero.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DfmError, Result};
use crate::model::{Constraint, Cost, Graph, InstanceKind, NodeLocal, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CostRecord {
    Quadratic {
        q: Vec<Vec<f64>>,
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    NegSigmoid {
        dim: usize,
        coord: usize,
        a: f64,
        b: f64,
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ConstraintRecord {
    /// `normalᵀx + offset <= 0`.
    Affine { normal: Vec<f64>, offset: f64 },
    /// `½ xᵀQx + normalᵀx + offset <= 0`.
    Quadratic {
        q: Vec<Vec<f64>>,
        normal: Vec<f64>,
        offset: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub cost: CostRecord,
    /// Overrides the smoothness constant derived from the cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    pub coupling: Vec<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub kind: InstanceKind,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_lower: Option<f64>,
    pub rhs: Vec<f64>,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    pub nodes: Vec<NodeRecord>,
    /// Optional starting allocation, one block per node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
}

fn default_name() -> String {
    "instance".into()
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(DfmError::DimensionMismatch(format!(
            "{what}: row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl CostRecord {
    fn build(&self) -> Result<Cost> {
        match self {
            CostRecord::Quadratic { q, linear, constant } => Ok(Cost::Quadratic {
                q: matrix(q, linear.len(), "cost matrix")?,
                linear: DVector::from_column_slice(linear),
                constant: *constant,
            }),
            CostRecord::NegSigmoid { dim, coord, a, b, p } => {
                if coord >= dim {
                    return Err(DfmError::InvalidProblem(format!("sigmoid coordinate {coord} outside dimension {dim}")));
                }
                Ok(Cost::neg_sigmoid(*dim, *coord, *a, *b, *p))
            }
        }
    }

    fn capture(cost: &Cost) -> Result<Self> {
        match cost {
            Cost::Quadratic { q, linear, constant } => Ok(CostRecord::Quadratic {
                q: rows_of(q),
                linear: linear.iter().copied().collect(),
                constant: *constant,
            }),
            Cost::NegSigmoid { dim, coord, a, b, p, .. } => Ok(CostRecord::NegSigmoid {
                dim: *dim,
                coord: *coord,
                a: *a,
                b: *b,
                p: *p,
            }),
            Cost::Custom(_) => Err(DfmError::InvalidArgument("custom costs cannot be serialized".into())),
        }
    }
}

impl ConstraintRecord {
    fn build(&self) -> Result<Constraint> {
        match self {
            ConstraintRecord::Affine { normal, offset } => Ok(Constraint::Affine {
                normal: DVector::from_column_slice(normal),
                offset: *offset,
            }),
            ConstraintRecord::Quadratic { q, normal, offset } => Ok(Constraint::Quadratic {
                q: matrix(q, normal.len(), "constraint matrix")?,
                normal: DVector::from_column_slice(normal),
                offset: *offset,
            }),
        }
    }

    fn capture(c: &Constraint) -> Result<Self> {
        match c {
            Constraint::Affine { normal, offset } => Ok(ConstraintRecord::Affine {
                normal: normal.iter().copied().collect(),
                offset: *offset,
            }),
            Constraint::Quadratic { q, normal, offset } => Ok(ConstraintRecord::Quadratic {
                q: rows_of(q),
                normal: normal.iter().copied().collect(),
                offset: *offset,
            }),
            Constraint::Custom(_) => Err(DfmError::InvalidArgument("custom constraints cannot be serialized".into())),
        }
    }
}

impl InstanceFile {
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let rows = self.rhs.len();
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let width = n.coupling.first().map_or(0, Vec::len);
                if n.coupling.len() != rows {
                    return Err(DfmError::DimensionMismatch(format!(
                        "node {i}: coupling has {} rows, rhs has {rows}",
                        n.coupling.len()
                    )));
                }
                let coupling = matrix(&n.coupling, width, &format!("node {i} coupling"))?;
                let cost = n.cost.build()?;
                let constraints = n.constraints.iter().map(ConstraintRecord::build).collect::<Result<Vec<_>>>()?;
                match n.smoothness {
                    Some(l) => NodeLocal::with_smoothness(cost, l, coupling, constraints),
                    None => NodeLocal::new(cost, coupling, constraints),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let graph = Graph::new(self.nodes.len(), self.edges.iter().copied())?;
        let mut spec = ProblemSpec::new(graph, nodes, DVector::from_column_slice(&self.rhs), self.rho)
            .with_name(self.name.clone())
            .with_kind(self.kind);
        spec.beta = self.beta;
        spec.beta1 = self.beta1;
        spec.f_lower = self.f_lower;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        let nodes = spec
            .nodes
            .iter()
            .map(|n| {
                Ok(NodeRecord {
                    cost: CostRecord::capture(&n.cost)?,
                    smoothness: Some(n.smoothness),
                    coupling: rows_of(&n.coupling),
                    constraints: n.constraints.iter().map(ConstraintRecord::capture).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InstanceFile {
            name: spec.name.clone(),
            kind: spec.kind,
            rho: spec.rho,
            beta: spec.beta,
            beta1: spec.beta1,
            f_lower: spec.f_lower,
            rhs: spec.rhs.iter().copied().collect(),
            edges: spec.graph.edges().collect(),
            nodes,
            initial: None,
        })
    }
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    serde_json::from_str(text).map_err(|e| DfmError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn load_instance(path: &Path) -> Result<InstanceFile> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: &Path, instance: &InstanceFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(instance)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::examples::{example_problem, Which};
    use crate::benchmarks::rate_control::{gen_rate_control, random_utilities, RateNetwork};
    use crate::model::{evaluate_objective, Allocation};

    const DOC_SAMPLE: &str = r#"{
      "name": "two-node",
      "rho": 0.01,
      "rhs": [1.0],
      "edges": [[0, 1]],
      "nodes": [
        {
          "cost": { "type": "quadratic", "q": [[1.0]], "linear": [-1.0] },
          "coupling": [[1.0]],
          "constraints": [{ "type": "affine", "normal": [-1.0], "offset": 0.0 }]
        },
        {
          "cost": { "type": "neg-sigmoid", "dim": 1, "coord": 0, "a": 1.0, "b": 0.5, "p": 2.0 },
          "coupling": [[1.0]]
        }
      ]
    }"#;

    #[test]
    fn documented_sample_loads() {
        let spec = parse_instance(DOC_SAMPLE).unwrap().to_spec().unwrap();
        assert_eq!(spec.node_count(), 2);
        assert_eq!(spec.graph.edge_count(), 1);
        assert_eq!(spec.nodes[0].constraints.len(), 1);
        assert_eq!(spec.kind, InstanceKind::Generic);
    }

    #[test]
    fn round_trip_preserves_objective() {
        let net = RateNetwork::four_source_chain();
        for spec in [example_problem(Which::Two, true), gen_rate_control(&net, &random_utilities(&net, 9)).unwrap()] {
            let file = InstanceFile::from_spec(&spec).unwrap();
            let text = serde_json::to_string(&file).unwrap();
            let back = parse_instance(&text).unwrap();
            assert_eq!(back, file);
            let rebuilt = back.to_spec().unwrap();
            let x = crate::benchmarks::init::feasible_initialization(&spec).unwrap();
            let y = Allocation::new(&rebuilt, x.blocks().to_vec()).unwrap();
            assert_eq!(evaluate_objective(&spec, &x).unwrap(), evaluate_objective(&rebuilt, &y).unwrap());
            assert_eq!(rebuilt.kind, spec.kind);
        }
    }

    #[test]
    fn syntax_errors_report_line() {
        match parse_instance("{\n  \"rho\": 1,\n  oops\n}") {
            Err(DfmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_coupling_rejected() {
        let text = DOC_SAMPLE.replace("\"coupling\": [[1.0]],\n          \"constraints\"", "\"coupling\": [[1.0, 2.0], [1.0]],\n          \"constraints\"");
        assert!(parse_instance(&text).unwrap().to_spec().is_err());
    }
}

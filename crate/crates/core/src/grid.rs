//! Network model: node/line description, Kirchhoff matrix assembly and the
//! derived open-circuit quantities.
//!
//! Nodes are reordered so that loads come first (in spec order) followed by
//! sources (in spec order). Every vector and matrix exposed by [`GridModel`]
//! uses this ordering.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Load,
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    /// Source voltage in volts. Required for sources, forbidden for loads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: String,
    pub to: String,
    /// Line conductance in siemens.
    pub conductance: f64,
}

/// Grid file contents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: Vec<NodeSpec>,
    pub lines: Vec<LineSpec>,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid spec serializes")
    }

    pub fn load(&mut self, id: &str) -> &mut Self {
        self.nodes.push(NodeSpec {
            id: id.to_string(),
            kind: NodeKind::Load,
            voltage: None,
        });
        self
    }

    pub fn source(&mut self, id: &str, voltage: f64) -> &mut Self {
        self.nodes.push(NodeSpec {
            id: id.to_string(),
            kind: NodeKind::Source,
            voltage: Some(voltage),
        });
        self
    }

    pub fn line(&mut self, from: &str, to: &str, conductance: f64) -> &mut Self {
        self.lines.push(LineSpec {
            from: from.to_string(),
            to: to.to_string(),
            conductance,
        });
        self
    }

    /// Node ids in model order: loads first, then sources.
    /// Loads and sources, each in file order.
    pub fn ordered_ids(&self) -> (Vec<&NodeSpec>, Vec<&NodeSpec>) {
        let loads = self.nodes.iter().filter(|n| n.kind == NodeKind::Load).collect();
        let sources = self.nodes.iter().filter(|n| n.kind == NodeKind::Source).collect();
        (loads, sources)
    }

    /// Checks every structural invariant of the grid file (ids, references,
    /// positivity, at least one load and one source).
    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for node in &self.nodes {
            if node.id.is_empty() {
                return Err(Error::InvalidSpec("empty node id".into()));
            }
            if !seen.insert(node.id.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate node id '{}'", node.id)));
            }
            match (node.kind, node.voltage) {
                (NodeKind::Load, Some(_)) => {
                    return Err(Error::InvalidSpec(format!(
                        "load '{}' must not carry a voltage",
                        node.id
                    )))
                }
                (NodeKind::Source, None) => {
                    return Err(Error::InvalidSpec(format!("source '{}' needs a voltage", node.id)))
                }
                (NodeKind::Source, Some(v)) if !(v.is_finite() && v > 0.0) => {
                    return Err(Error::InvalidSpec(format!(
                        "source '{}' voltage must be positive, got {v}",
                        node.id
                    )))
                }
                _ => {}
            }
        }
        let (loads, sources) = self.ordered_ids();
        if loads.is_empty() {
            return Err(Error::InvalidSpec("grid has no load nodes".into()));
        }
        if sources.is_empty() {
            return Err(Error::InvalidSpec("grid has no source nodes".into()));
        }
        let mut pairs = HashSet::new();
        for line in &self.lines {
            for end in [&line.from, &line.to] {
                if !seen.contains(end.as_str()) {
                    return Err(Error::InvalidSpec(format!("line references unknown node '{end}'")));
                }
            }
            if line.from == line.to {
                return Err(Error::InvalidSpec(format!("self-loop at node '{}'", line.from)));
            }
            if !(line.conductance.is_finite() && line.conductance > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "line {}-{} conductance must be positive, got {}",
                    line.from, line.to, line.conductance
                )));
            }
            let key = if line.from < line.to {
                (line.from.as_str(), line.to.as_str())
            } else {
                (line.to.as_str(), line.from.as_str())
            };
            if !pairs.insert(key) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate line between '{}' and '{}'",
                    key.0, key.1
                )));
            }
        }
        Ok(())
    }
}

/// Result of [`validate_connectivity`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    /// Connected components of the load subgraph, as sorted load indices.
    pub load_components: Vec<Vec<usize>>,
}

impl Connectivity {
    pub fn loads_irreducible(&self) -> bool {
        self.load_components.len() == 1
    }
}

/// Breadth-first reachability over the line pattern. Lines that reference
/// unknown nodes are ignored.
pub fn validate_connectivity(spec: &GridSpec) -> Connectivity {
    let (loads, sources) = spec.ordered_ids();
    let index: HashMap<&str, usize> = loads
        .iter()
        .chain(sources.iter())
        .enumerate()
        .map(|(i, node)| (node.id.as_str(), i))
        .collect();
    let total = index.len();
    let n = loads.len();
    let mut adjacency = vec![Vec::new(); total];
    for line in &spec.lines {
        if let (Some(&a), Some(&b)) = (index.get(line.from.as_str()), index.get(line.to.as_str())) {
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }

    let reach = |start: usize, allowed: &dyn Fn(usize) -> bool, seen: &mut Vec<bool>| {
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if allowed(v) && !seen[v] {
                    seen[v] = true;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        members
    };

    let connected = if total == 0 {
        true
    } else {
        let mut seen = vec![false; total];
        reach(0, &|_| true, &mut seen).len() == total
    };

    let mut seen = vec![false; total];
    let mut load_components = Vec::new();
    for start in 0..n {
        if !seen[start] {
            load_components.push(reach(start, &|v| v < n, &mut seen));
        }
    }
    Connectivity {
        connected,
        load_components,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModelOptions {
    /// Accept a load subgraph with several components. The analysis then
    /// treats the grid as a product of independent blocks; parametrization
    /// routines that need an irreducible `Y_LL` are not meaningful.
    pub allow_reducible_loads: bool,
}

/// Validated conductance model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GridModel {
    load_ids: Vec<String>,
    source_ids: Vec<String>,
    load_index: Vec<usize>,
    source_index: Vec<usize>,
    y: DMatrix<f64>,
    y_ll: DMatrix<f64>,
    y_ls: DMatrix<f64>,
    y_ss: DMatrix<f64>,
    v_s: DVector<f64>,
    v_star: DVector<f64>,
    i_star: DVector<f64>,
    load_components: Vec<Vec<usize>>,
}

/// Builds the model, rejecting a reducible load subgraph.
pub fn build_model(spec: &GridSpec) -> Result<GridModel> {
    build_model_with(spec, ModelOptions::default())
}

pub fn build_model_with(spec: &GridSpec, options: ModelOptions) -> Result<GridModel> {
    spec.check()?;
    let connectivity = validate_connectivity(spec);
    if !connectivity.connected {
        return Err(Error::DisconnectedGraph);
    }
    if !connectivity.loads_irreducible() && !options.allow_reducible_loads {
        return Err(Error::LoadSubgraphReducible {
            components: connectivity.load_components,
        });
    }

    let (loads, sources) = spec.ordered_ids();
    let n = loads.len();
    let m = sources.len();
    let ordered: Vec<&NodeSpec> = loads.iter().chain(sources.iter()).copied().collect();
    let index: HashMap<&str, usize> = ordered
        .iter()
        .enumerate()
        .map(|(i, node)| (node.id.as_str(), i))
        .collect();
    let spec_position: HashMap<&str, usize> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| (node.id.as_str(), i))
        .collect();

    let mut y = DMatrix::zeros(n + m, n + m);
    for line in &spec.lines {
        let a = index[line.from.as_str()];
        let b = index[line.to.as_str()];
        let w = line.conductance;
        y[(a, a)] += w;
        y[(b, b)] += w;
        y[(a, b)] -= w;
        y[(b, a)] -= w;
    }

    let max_diag: f64 = y.diagonal().max();
    let row_tol = 1e-9 * max_diag;
    for (i, row_sum) in y.column_sum().iter().enumerate() {
        if row_sum.abs() > row_tol {
            return Err(Error::InvalidSpec(format!(
                "Kirchhoff row {i} sums to {row_sum}, not zero"
            )));
        }
    }

    let y_ll = y.view((0, 0), (n, n)).into_owned();
    let y_ls = y.view((0, n), (n, m)).into_owned();
    let y_ss = y.view((n, n), (m, m)).into_owned();
    let v_s = DVector::from_iterator(m, sources.iter().map(|s| s.voltage.unwrap_or_default()));
    let i_star = -(&y_ls * &v_s);
    let chol = y_ll
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidSpec("load block is not positive definite".into()))?;
    let v_star = chol.solve(&i_star);

    if v_star.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidSpec("open-circuit voltages are not positive".into()));
    }

    Ok(GridModel {
        load_ids: loads.iter().map(|l| l.id.clone()).collect(),
        source_ids: sources.iter().map(|s| s.id.clone()).collect(),
        load_index: loads.iter().map(|l| spec_position[l.id.as_str()]).collect(),
        source_index: sources.iter().map(|s| spec_position[s.id.as_str()]).collect(),
        y,
        y_ll,
        y_ls,
        y_ss,
        v_s,
        v_star,
        i_star,
        load_components: connectivity.load_components,
    })
}

impl GridModel {
    /// Number of loads.
    pub fn n(&self) -> usize {
        self.load_ids.len()
    }

    /// Number of sources.
    pub fn m(&self) -> usize {
        self.source_ids.len()
    }

    pub fn load_ids(&self) -> &[String] {
        &self.load_ids
    }

    pub fn source_ids(&self) -> &[String] {
        &self.source_ids
    }

    /// Positions of the loads in the original spec node list.
    pub fn load_index(&self) -> &[usize] {
        &self.load_index
    }

    /// Positions of the sources in the original spec node list.
    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    /// Full Kirchhoff matrix in model order.
    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn y_ll(&self) -> &DMatrix<f64> {
        &self.y_ll
    }

    pub fn y_ls(&self) -> &DMatrix<f64> {
        &self.y_ls
    }

    pub fn y_ss(&self) -> &DMatrix<f64> {
        &self.y_ss
    }

    pub fn v_s(&self) -> &DVector<f64> {
        &self.v_s
    }

    /// Open-circuit load voltages.
    pub fn v_star(&self) -> &DVector<f64> {
        &self.v_star
    }

    /// Source-injected currents `-Y_LS V_S`.
    pub fn i_star(&self) -> &DVector<f64> {
        &self.i_star
    }

    pub fn load_components(&self) -> &[Vec<usize>] {
        &self.load_components
    }

    pub fn loads_irreducible(&self) -> bool {
        self.load_components.len() == 1
    }

    /// Characteristic magnitude of demands: `‖Y_LL‖∞ ‖V*‖∞²`.
    pub fn power_scale(&self) -> f64 {
        let v = self.v_star.amax();
        self.y_ll.abs().row_sum().max() * v * v
    }

    /// Characteristic magnitude of Jacobian entries: `‖Y_LL‖∞ ‖V*‖∞`.
    pub fn jacobian_scale(&self) -> f64 {
        self.y_ll.abs().row_sum().max() * self.v_star.amax()
    }
}

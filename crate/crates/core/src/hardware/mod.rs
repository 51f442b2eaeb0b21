//! Chip model: coupling graph, calibration data and hop-distance matrices.

mod distance;
mod synth;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use distance::shortest_path;
pub use distance::{shortest_paths, DistanceMatrix};
pub use synth::random_backend;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot read backend file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed backend document: {0}")]
    Format(String),
    #[error("edge {0}-{1} is a self-loop")]
    SelfLoop(usize, usize),
    #[error("edge {0}-{1} listed twice")]
    DuplicateEdge(usize, usize),
    #[error("edge {a}-{b} references a qubit outside 0..{n}")]
    EdgeOutOfRange { a: usize, b: usize, n: usize },
    #[error("coupling graph is disconnected")]
    Disconnected,
    #[error("coupling graph has no qubits")]
    Empty,
    #[error("missing calibration entry: {0}")]
    MissingCalibration(String),
    #[error("calibration entry `{0}` does not match any coupling edge")]
    UnknownCalibrationEntry(String),
    #[error("{what} = {value} is outside [0, 1)")]
    RateOutOfRange { what: String, value: f64 },
    #[error("degenerate base calibration: {0} range has min > max")]
    DegenerateRange(&'static str),
}

/// Undirected coupling graph with sorted, deduplicated edges `(a, b)`, `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingGraph {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl CouplingGraph {
    /// Validates and builds a graph. Connectivity is checked by [`Backend`]
    /// construction, not here, so subgraphs can be represented.
    pub fn new(n_qubits: usize, edges: &[(usize, usize)]) -> Result<Self, BackendError> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(BackendError::SelfLoop(a, b));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(BackendError::EdgeOutOfRange { a, b, n: n_qubits });
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(BackendError::DuplicateEdge(a, b));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_qubits];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            n_qubits,
            edges,
            adjacency,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbors of `q`.
    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn degree(&self, q: usize) -> usize {
        self.adjacency[q].len()
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        if self.n_qubits == 0 {
            return false;
        }
        let mut seen = vec![false; self.n_qubits];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n_qubits
    }
}

/// Per-edge and per-qubit error rates. Fidelity is `1 - rate` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Keyed by normalized edge `(min, max)`.
    pub cnot_error: BTreeMap<(usize, usize), f64>,
    pub readout_error: Vec<f64>,
    pub oneq_error: Vec<f64>,
    pub timestamp: String,
}

impl Calibration {
    /// Uniform rates on every edge and qubit of `graph`.
    pub fn uniform(graph: &CouplingGraph, cnot: f64, readout: f64, oneq: f64) -> Self {
        Self {
            cnot_error: graph.edges().iter().map(|&e| (e, cnot)).collect(),
            readout_error: vec![readout; graph.n_qubits()],
            oneq_error: vec![oneq; graph.n_qubits()],
            timestamp: "uniform".into(),
        }
    }

    pub fn cnot(&self, a: usize, b: usize) -> f64 {
        self.cnot_error[&(a.min(b), a.max(b))]
    }

    pub fn cnot_fidelity(&self, a: usize, b: usize) -> f64 {
        1.0 - self.cnot(a, b)
    }

    pub fn readout_fidelity(&self, q: usize) -> f64 {
        1.0 - self.readout_error[q]
    }

    pub fn oneq_fidelity(&self, q: usize) -> f64 {
        1.0 - self.oneq_error[q]
    }
}

/// A chip: coupling graph plus matching calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Backend {
    pub name: String,
    pub graph: CouplingGraph,
    pub calib: Calibration,
}

impl Backend {
    pub fn new(
        name: impl Into<String>,
        graph: CouplingGraph,
        calib: Calibration,
    ) -> Result<Self, BackendError> {
        let n = graph.n_qubits();
        if n == 0 {
            return Err(BackendError::Empty);
        }
        if !graph.is_connected() {
            return Err(BackendError::Disconnected);
        }
        for &(a, b) in graph.edges() {
            if !calib.cnot_error.contains_key(&(a, b)) {
                return Err(BackendError::MissingCalibration(format!(
                    "cnot_error {a}-{b}"
                )));
            }
        }
        if let Some(&(a, b)) = calib
            .cnot_error
            .keys()
            .find(|&&(a, b)| !graph.is_edge(a, b))
        {
            return Err(BackendError::UnknownCalibrationEntry(format!("{a}-{b}")));
        }
        for (what, rates) in [
            ("readout_error", &calib.readout_error),
            ("oneq_error", &calib.oneq_error),
        ] {
            if rates.len() < n {
                return Err(BackendError::MissingCalibration(format!(
                    "{what}[{}]",
                    rates.len()
                )));
            }
            if rates.len() > n {
                return Err(BackendError::UnknownCalibrationEntry(format!(
                    "{what}[{n}]"
                )));
            }
        }
        let all = calib
            .cnot_error
            .iter()
            .map(|(&(a, b), &r)| (format!("cnot_error {a}-{b}"), r))
            .chain(
                calib
                    .readout_error
                    .iter()
                    .enumerate()
                    .map(|(q, &r)| (format!("readout_error[{q}]"), r)),
            )
            .chain(
                calib
                    .oneq_error
                    .iter()
                    .enumerate()
                    .map(|(q, &r)| (format!("oneq_error[{q}]"), r)),
            );
        for (what, value) in all {
            if !(0.0..1.0).contains(&value) {
                return Err(BackendError::RateOutOfRange { what, value });
            }
        }
        Ok(Self {
            name: name.into(),
            graph,
            calib,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.graph.n_qubits()
    }

    pub fn to_document(&self) -> BackendDocument {
        BackendDocument {
            name: self.name.clone(),
            n_qubits: self.n_qubits(),
            edges: self.graph.edges().iter().map(|&(a, b)| [a, b]).collect(),
            cnot_error: self
                .calib
                .cnot_error
                .iter()
                .map(|(&(a, b), &r)| (format!("{a}-{b}"), r))
                .collect(),
            readout_error: self.calib.readout_error.clone(),
            oneq_error: self.calib.oneq_error.clone(),
            timestamp: Some(self.calib.timestamp.clone()),
        }
    }
}

/// On-disk backend description. Unknown fields (T1/T2, gate times, ...) are
/// accepted and ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDocument {
    pub name: String,
    pub n_qubits: usize,
    pub edges: Vec<[usize; 2]>,
    /// Keys are `"a-b"` in either orientation.
    pub cnot_error: BTreeMap<String, f64>,
    pub readout_error: Vec<f64>,
    pub oneq_error: Vec<f64>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

fn parse_edge_key(key: &str) -> Result<(usize, usize), BackendError> {
    let bad = || BackendError::Format(format!("bad cnot_error key `{key}`, expected \"a-b\""));
    let (a, b) = key.split_once('-').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    Ok((a.min(b), a.max(b)))
}

/// Validates a backend document.
pub fn load_backend(doc: &BackendDocument) -> Result<Backend, BackendError> {
    let edges: Vec<(usize, usize)> = doc.edges.iter().map(|&[a, b]| (a, b)).collect();
    let graph = CouplingGraph::new(doc.n_qubits, &edges)?;
    let mut cnot_error = BTreeMap::new();
    for (key, &rate) in &doc.cnot_error {
        let e = parse_edge_key(key)?;
        if cnot_error.insert(e, rate).is_some() {
            return Err(BackendError::Format(format!(
                "cnot_error for {}-{} given twice",
                e.0, e.1
            )));
        }
    }
    let calib = Calibration {
        cnot_error,
        readout_error: doc.readout_error.clone(),
        oneq_error: doc.oneq_error.clone(),
        timestamp: doc.timestamp.clone().unwrap_or_default(),
    };
    Backend::new(doc.name.clone(), graph, calib)
}

/// Parses a backend document: JSON when the text starts with `{`, TOML otherwise.
pub fn parse_backend(text: &str) -> Result<Backend, BackendError> {
    let doc: BackendDocument = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| BackendError::Format(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| BackendError::Format(e.to_string()))?
    };
    load_backend(&doc)
}

pub fn read_backend(path: impl AsRef<Path>) -> Result<Backend, BackendError> {
    parse_backend(&std::fs::read_to_string(path)?)
}

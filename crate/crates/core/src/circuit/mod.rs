//! Quantum program IR: gates, programs, dependency DAGs and the front-layer
//! queries the routers are built on.

mod dag;
mod parse;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

pub use dag::{critical_gates, front_layer, Dag};
pub use parse::{parse_program, ParseError};

/// Gate opcodes accepted by the QASM subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    U1,
    U2,
    U3,
    Rx,
    Ry,
    Rz,
    H,
    X,
    Y,
    Z,
    S,
    Sdg,
    T,
    Tdg,
    Cx,
    Measure,
    Barrier,
}

impl GateKind {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "u1" => Self::U1,
            "u2" => Self::U2,
            "u3" => Self::U3,
            "rx" => Self::Rx,
            "ry" => Self::Ry,
            "rz" => Self::Rz,
            "h" => Self::H,
            "x" => Self::X,
            "y" => Self::Y,
            "z" => Self::Z,
            "s" => Self::S,
            "sdg" => Self::Sdg,
            "t" => Self::T,
            "tdg" => Self::Tdg,
            "cx" => Self::Cx,
            "measure" => Self::Measure,
            "barrier" => Self::Barrier,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::U1 => "u1",
            Self::U2 => "u2",
            Self::U3 => "u3",
            Self::Rx => "rx",
            Self::Ry => "ry",
            Self::Rz => "rz",
            Self::H => "h",
            Self::X => "x",
            Self::Y => "y",
            Self::Z => "z",
            Self::S => "s",
            Self::Sdg => "sdg",
            Self::T => "t",
            Self::Tdg => "tdg",
            Self::Cx => "cx",
            Self::Measure => "measure",
            Self::Barrier => "barrier",
        }
    }

    /// Number of rotation parameters the opcode takes.
    pub fn n_params(self) -> usize {
        match self {
            Self::U1 | Self::Rx | Self::Ry | Self::Rz => 1,
            Self::U2 => 2,
            Self::U3 => 3,
            _ => 0,
        }
    }

    pub fn is_one_qubit(self) -> bool {
        !matches!(self, Self::Cx | Self::Measure | Self::Barrier)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
    /// Classical bit written by a measure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clbit: Option<usize>,
    pub id: usize,
}

impl Gate {
    pub fn is_cnot(&self) -> bool {
        self.kind == GateKind::Cx
    }

    /// Writes the gate as a QASM statement with qubit indices remapped by `map`.
    pub fn write_qasm(
        &self,
        out: &mut String,
        qreg: &str,
        creg: &str,
        map: impl Fn(usize) -> usize,
    ) {
        out.push_str(self.kind.name());
        if !self.params.is_empty() {
            let params: Vec<String> = self.params.iter().map(|p| format!("{p:?}")).collect();
            let _ = write!(out, "({})", params.join(","));
        }
        let operands: Vec<String> = self
            .qubits
            .iter()
            .map(|&q| format!("{qreg}[{}]", map(q)))
            .collect();
        let _ = write!(out, " {}", operands.join(","));
        if let Some(c) = self.clbit {
            let _ = write!(out, " -> {creg}[{c}]");
        }
        out.push_str(";\n");
    }
}

/// A parsed program: the unit of compilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumProgram {
    pub name: String,
    pub n_qubits: usize,
    pub n_clbits: usize,
    pub gates: Vec<Gate>,
    pub n_cnot: usize,
    pub n_1q: usize,
}

impl QuantumProgram {
    /// Builds a program from a gate list, renumbering ids in order and
    /// caching the gate counts.
    pub fn new(
        name: impl Into<String>,
        n_qubits: usize,
        n_clbits: usize,
        mut gates: Vec<Gate>,
    ) -> Self {
        for (i, g) in gates.iter_mut().enumerate() {
            g.id = i;
        }
        let n_cnot = gates.iter().filter(|g| g.is_cnot()).count();
        let n_1q = gates.iter().filter(|g| g.kind.is_one_qubit()).count();
        Self {
            name: name.into(),
            n_qubits,
            n_clbits,
            gates,
            n_cnot,
            n_1q,
        }
    }

    /// CNOT plus one-qubit gate count (measures and barriers excluded).
    pub fn n_gates(&self) -> usize {
        self.n_cnot + self.n_1q
    }

    pub fn cnot_density(&self) -> f64 {
        self.n_cnot as f64 / self.n_qubits as f64
    }

    pub fn has_measures(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Measure)
    }

    /// (logical qubit, classical bit) pairs of the program's measurements.
    /// Programs without measures read every qubit into the same-index bit.
    pub fn readout_map(&self) -> Vec<(usize, usize)> {
        if self.has_measures() {
            self.gates
                .iter()
                .filter(|g| g.kind == GateKind::Measure)
                .map(|g| (g.qubits[0], g.clbit.unwrap_or(g.qubits[0])))
                .collect()
        } else {
            (0..self.n_qubits).map(|q| (q, q)).collect()
        }
    }

    /// Number of classical outcome bits (see [`Self::readout_map`]).
    pub fn n_outcome_bits(&self) -> usize {
        if self.has_measures() {
            self.n_clbits
        } else {
            self.n_qubits
        }
    }

    /// Weighted logical interaction graph: CNOT count per unordered pair.
    pub fn interaction_weights(&self) -> Vec<((usize, usize), usize)> {
        let mut weights = std::collections::BTreeMap::new();
        for g in self.gates.iter().filter(|g| g.is_cnot()) {
            let (a, b) = (g.qubits[0].min(g.qubits[1]), g.qubits[0].max(g.qubits[1]));
            *weights.entry((a, b)).or_insert(0usize) += 1;
        }
        weights.into_iter().collect()
    }

    pub fn to_qasm(&self) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        let _ = writeln!(out, "qreg q[{}];", self.n_qubits);
        if self.n_clbits > 0 {
            let _ = writeln!(out, "creg c[{}];", self.n_clbits);
        }
        for g in &self.gates {
            g.write_qasm(&mut out, "q", "c", |q| q);
        }
        out
    }
}

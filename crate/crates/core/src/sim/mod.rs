//! Exact statevector simulation. Basis states are little-endian: qubit `k`
//! is bit `k` of the amplitude index.

mod noise;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{Gate, GateKind, QuantumProgram};

pub use noise::{ideal_mode, noisy_success_probability, ProgramTrace, PstMode, TraceOp};

/// Default qubit cap for exact simulation.
pub const DEFAULT_CAP: usize = 12;
/// No caller-supplied cap can exceed this.
pub const HARD_CAP: usize = 20;
/// Probabilities below this are dropped from distributions.
pub const PRUNE: f64 = 1e-15;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{n} qubits exceed the simulation cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("gate `{0}` has no unitary")]
    Unsupported(GateKind),
    #[error("qubit {qubit} out of range for a {n}-qubit state")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("program `{0}` has no unique most likely outcome")]
    AmbiguousMode(String),
}

pub type Matrix2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2×2 unitary of a one-qubit gate.
pub fn gate_matrix(kind: GateKind, params: &[f64]) -> Result<Matrix2, SimError> {
    let p = |i: usize| params.get(i).copied().unwrap_or(0.0);
    let u3 = |theta: f64, phi: f64, lambda: f64| {
        let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
        [
            [c(co, 0.0), -Complex64::from_polar(s, lambda)],
            [
                Complex64::from_polar(s, phi),
                Complex64::from_polar(co, phi + lambda),
            ],
        ]
    };
    let diag = |phase: f64| {
        [
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), Complex64::from_polar(1.0, phase)],
        ]
    };
    let zero = c(0.0, 0.0);
    Ok(match kind {
        GateKind::U3 => u3(p(0), p(1), p(2)),
        GateKind::U2 => u3(std::f64::consts::FRAC_PI_2, p(0), p(1)),
        GateKind::U1 => diag(p(0)),
        GateKind::Rx => {
            let (s, co) = ((p(0) / 2.0).sin(), (p(0) / 2.0).cos());
            [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
        }
        GateKind::Ry => {
            let (s, co) = ((p(0) / 2.0).sin(), (p(0) / 2.0).cos());
            [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
        }
        GateKind::Rz => [
            [Complex64::from_polar(1.0, -p(0) / 2.0), zero],
            [zero, Complex64::from_polar(1.0, p(0) / 2.0)],
        ],
        GateKind::H => [
            [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
        ],
        GateKind::X => [[zero, c(1.0, 0.0)], [c(1.0, 0.0), zero]],
        GateKind::Y => [[zero, c(0.0, -1.0)], [c(0.0, 1.0), zero]],
        GateKind::Z => diag(std::f64::consts::PI),
        GateKind::S => diag(std::f64::consts::FRAC_PI_2),
        GateKind::Sdg => diag(-std::f64::consts::FRAC_PI_2),
        GateKind::T => diag(std::f64::consts::FRAC_PI_4),
        GateKind::Tdg => diag(-std::f64::consts::FRAC_PI_4),
        GateKind::Cx | GateKind::Measure | GateKind::Barrier => {
            return Err(SimError::Unsupported(kind))
        }
    })
}

pub(crate) fn apply_1q_raw(amps: &mut [Complex64], k: usize, m: &Matrix2) {
    let bit = 1usize << k;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a0, a1) = (amps[i], amps[i | bit]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

pub(crate) fn apply_cx_raw(amps: &mut [Complex64], control: usize, target: usize) {
    let (cb, tb) = (1usize << control, 1usize << target);
    for i in 0..amps.len() {
        if i & cb != 0 && i & tb == 0 {
            amps.swap(i, i | tb);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits`, which must not exceed [`HARD_CAP`].
    pub fn new(n_qubits: usize) -> Result<Self, SimError> {
        if n_qubits > HARD_CAP {
            return Err(SimError::CapExceeded {
                n: n_qubits,
                cap: HARD_CAP,
            });
        }
        let mut amps = vec![c(0.0, 0.0); 1 << n_qubits];
        amps[0] = c(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self, q: usize) -> Result<(), SimError> {
        if q >= self.n_qubits {
            return Err(SimError::QubitOutOfRange {
                qubit: q,
                n: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies `kind` to `qubits`. Measures and barriers are rejected.
    pub fn apply(
        &mut self,
        kind: GateKind,
        qubits: &[usize],
        params: &[f64],
    ) -> Result<(), SimError> {
        for &q in qubits {
            self.check(q)?;
        }
        if kind == GateKind::Cx {
            apply_cx_raw(&mut self.amps, qubits[0], qubits[1]);
        } else {
            apply_1q_raw(&mut self.amps, qubits[0], &gate_matrix(kind, params)?);
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<(), SimError> {
        self.apply(gate.kind, &gate.qubits, &gate.params)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Final state of the unitary part of `program` (measures and barriers are
/// skipped).
pub fn simulate(program: &QuantumProgram, cap: usize) -> Result<StateVector, SimError> {
    let cap = cap.min(HARD_CAP);
    if program.n_qubits > cap {
        return Err(SimError::CapExceeded {
            n: program.n_qubits,
            cap,
        });
    }
    let mut sv = StateVector::new(program.n_qubits)?;
    for g in &program.gates {
        if !matches!(g.kind, GateKind::Measure | GateKind::Barrier) {
            sv.apply_gate(g)?;
        }
    }
    Ok(sv)
}

/// Marginal of `probs` onto outcome bits: `bits` pairs a state qubit with the
/// outcome bit it is read into.
pub fn marginal(probs: &[f64], bits: &[(usize, usize)]) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    for (i, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let key = bits
            .iter()
            .fold(0u64, |acc, &(q, b)| acc | (((i >> q) & 1) as u64) << b);
        *out.entry(key).or_insert(0.0) += p;
    }
    out.retain(|_, p| *p >= PRUNE);
    out
}

/// Exact distribution over the program's classical outcome bits (every qubit
/// when the program has no measures).
pub fn output_distribution(
    program: &QuantumProgram,
    cap: usize,
) -> Result<BTreeMap<u64, f64>, SimError> {
    let sv = simulate(program, cap)?;
    Ok(marginal(&sv.probabilities(), &program.readout_map()))
}

/// Renders an outcome as a bitstring, highest bit first.
pub fn bitstring(outcome: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|b| if outcome >> b & 1 == 1 { '1' } else { '0' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_program;

    fn dist(src: &str) -> BTreeMap<u64, f64> {
        output_distribution(&parse_program("t", src).unwrap(), DEFAULT_CAP).unwrap()
    }

    #[test]
    fn basic_gates() {
        assert_eq!(dist("qreg q[1]; x q[0];"), BTreeMap::from([(1, 1.0)]));
        assert_eq!(
            dist("qreg q[2]; x q[0]; cx q[0],q[1];"),
            BTreeMap::from([(3, 1.0)])
        );
        let hh = dist("qreg q[1]; h q[0]; h q[0];");
        assert!((hh[&0] - 1.0).abs() < 1e-12 && hh.len() == 1);
        let h = dist("qreg q[1]; h q[0];");
        assert!((h[&0] - 0.5).abs() < 1e-12 && (h[&1] - 0.5).abs() < 1e-12);
        assert_eq!(dist("qreg q[3];"), BTreeMap::from([(0, 1.0)]));
    }

    #[test]
    fn measured_bits_only() {
        let d = dist("qreg q[2]; creg c[1]; x q[0]; h q[1]; measure q[0] -> c[0];");
        assert_eq!(d.len(), 1);
        assert!((d[&1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let p = parse_program("t", "qreg q[13];").unwrap();
        assert!(matches!(
            output_distribution(&p, DEFAULT_CAP),
            Err(SimError::CapExceeded { n: 13, cap: 12 })
        ));
        assert!(StateVector::new(21).is_err());
    }

    #[test]
    fn bitstrings_are_msb_first() {
        assert_eq!(bitstring(0b011, 3), "011");
        assert_eq!(bitstring(1, 2), "01");
    }
}

//! Success-probability proxy under independent gate failures. A failing gate
//! depolarizes every logical qubit it touches; a readout flips its bit with
//! the readout error of the qubit it is measured on.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    apply_1q_raw, apply_cx_raw, gate_matrix, marginal, output_distribution, Matrix2, SimError,
    StateVector,
};
use crate::circuit::{Gate, GateKind, QuantumProgram};

/// Largest program the exact (density-matrix) mode accepts.
pub const EXACT_CAP: usize = 10;
/// Two outcomes closer than this in probability tie for the mode.
const MODE_TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PstMode {
    Exact,
    Sampled { shots: usize, seed: u64 },
}

/// One step of a program's execution in its logical frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceOp {
    /// A program gate that fails with probability `error`.
    Gate { gate: Gate, error: f64 },
    /// Identity that fails with probability `error` (one CNOT of a SWAP).
    Fault { qubits: Vec<usize>, error: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProgramTrace {
    pub ops: Vec<TraceOp>,
    /// Readout error per measured logical qubit.
    pub readout_error: BTreeMap<usize, f64>,
}

/// The unique most likely ideal outcome and its probability.
pub fn ideal_mode(program: &QuantumProgram) -> Result<(u64, f64), SimError> {
    let dist = output_distribution(program, super::HARD_CAP)?;
    let mut sorted: Vec<(u64, f64)> = dist.into_iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    match sorted.as_slice() {
        [] => Err(SimError::AmbiguousMode(program.name.clone())),
        [(o, p)] => Ok((*o, *p)),
        [(o, p), (_, q), ..] if p - q > MODE_TIE => Ok((*o, *p)),
        _ => Err(SimError::AmbiguousMode(program.name.clone())),
    }
}

/// Mixed state of `n` qubits stored as `vec(ρ)` on `2n` qubits: entry
/// `ρ[r][c]` lives at index `r | c << n`.
struct Density {
    n: usize,
    v: Vec<Complex64>,
}

impl Density {
    fn new(n: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); 1 << (2 * n)];
        v[0] = Complex64::new(1.0, 0.0);
        Self { n, v }
    }

    fn apply_1q(&mut self, k: usize, m: &Matrix2) {
        apply_1q_raw(&mut self.v, k, m);
        let conj = [
            [m[0][0].conj(), m[0][1].conj()],
            [m[1][0].conj(), m[1][1].conj()],
        ];
        apply_1q_raw(&mut self.v, self.n + k, &conj);
    }

    fn apply_cx(&mut self, a: usize, b: usize) {
        apply_cx_raw(&mut self.v, a, b);
        apply_cx_raw(&mut self.v, self.n + a, self.n + b);
    }

    /// Replaces qubit `k` by the maximally mixed state.
    fn depolarize(&mut self, k: usize) {
        let (rb, cb) = (1usize << k, 1usize << (self.n + k));
        for i in 0..self.v.len() {
            if i & rb == 0 && i & cb == 0 {
                let avg = (self.v[i] + self.v[i | rb | cb]) * 0.5;
                self.v[i] = avg;
                self.v[i | rb | cb] = avg;
                self.v[i | rb] = Complex64::new(0.0, 0.0);
                self.v[i | cb] = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn mix(&mut self, error: f64, before: &[Complex64]) {
        // ρ ← (1 − p)·before + p·current
        for (x, b) in self.v.iter_mut().zip(before) {
            *x = *b * (1.0 - error) + *x * error;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let dim = 1usize << self.n;
        (0..dim).map(|r| self.v[r | r << self.n].re).collect()
    }
}

fn apply_readout_noise(dist: &BTreeMap<u64, f64>, flips: &[(usize, f64)]) -> BTreeMap<u64, f64> {
    let mut cur = dist.clone();
    for &(bit, p) in flips {
        let mut next = BTreeMap::new();
        for (&o, &q) in &cur {
            *next.entry(o).or_insert(0.0) += q * (1.0 - p);
            *next.entry(o ^ (1 << bit)).or_insert(0.0) += q * p;
        }
        cur = next;
    }
    cur
}

fn readout_flips(program: &QuantumProgram, trace: &ProgramTrace) -> Vec<(usize, f64)> {
    program
        .readout_map()
        .into_iter()
        .map(|(q, b)| (b, trace.readout_error.get(&q).copied().unwrap_or(0.0)))
        .collect()
}

fn exact(program: &QuantumProgram, trace: &ProgramTrace, target: u64) -> Result<f64, SimError> {
    let n = program.n_qubits;
    if n > EXACT_CAP {
        return Err(SimError::CapExceeded { n, cap: EXACT_CAP });
    }
    let mut rho = Density::new(n);
    for op in &trace.ops {
        let (qubits, error) = match op {
            TraceOp::Gate { gate, error } => {
                match gate.kind {
                    GateKind::Measure | GateKind::Barrier => continue,
                    GateKind::Cx => rho.apply_cx(gate.qubits[0], gate.qubits[1]),
                    k => rho.apply_1q(gate.qubits[0], &gate_matrix(k, &gate.params)?),
                }
                (&gate.qubits, *error)
            }
            TraceOp::Fault { qubits, error } => (qubits, *error),
        };
        if error > 0.0 {
            let before = rho.v.clone();
            for &q in qubits {
                rho.depolarize(q);
            }
            rho.mix(error, &before);
        }
    }
    let dist = marginal(&rho.diagonal(), &program.readout_map());
    let noisy = apply_readout_noise(&dist, &readout_flips(program, trace));
    Ok(noisy.get(&target).copied().unwrap_or(0.0))
}

fn random_pauli(sv: &mut StateVector, q: usize, rng: &mut ChaCha8Rng) -> Result<(), SimError> {
    match rng.gen_range(0..4) {
        1 => sv.apply(GateKind::X, &[q], &[]),
        2 => sv.apply(GateKind::Y, &[q], &[]),
        3 => sv.apply(GateKind::Z, &[q], &[]),
        _ => Ok(()),
    }
}

fn sampled(
    program: &QuantumProgram,
    trace: &ProgramTrace,
    target: u64,
    shots: usize,
    seed: u64,
) -> Result<f64, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flips = readout_flips(program, trace);
    let readout = program.readout_map();
    let mut hits = 0usize;
    for _ in 0..shots {
        let mut sv = StateVector::new(program.n_qubits)?;
        for op in &trace.ops {
            let (qubits, error) = match op {
                TraceOp::Gate { gate, error } => {
                    if matches!(gate.kind, GateKind::Measure | GateKind::Barrier) {
                        continue;
                    }
                    sv.apply_gate(gate)?;
                    (&gate.qubits, *error)
                }
                TraceOp::Fault { qubits, error } => (qubits, *error),
            };
            if error > 0.0 && rng.gen::<f64>() < error {
                for &q in qubits {
                    random_pauli(&mut sv, q, &mut rng)?;
                }
            }
        }
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        let mut basis = sv.amplitudes().len() - 1;
        for (i, a) in sv.amplitudes().iter().enumerate() {
            acc += a.norm_sqr();
            if r < acc {
                basis = i;
                break;
            }
        }
        let mut outcome = readout
            .iter()
            .fold(0u64, |acc, &(q, b)| acc | (((basis >> q) & 1) as u64) << b);
        for &(bit, p) in &flips {
            if rng.gen::<f64>() < p {
                outcome ^= 1 << bit;
            }
        }
        hits += usize::from(outcome == target);
    }
    Ok(hits as f64 / shots.max(1) as f64)
}

/// Probability that `program`, executed as `trace`, yields its ideal modal
/// outcome.
pub fn noisy_success_probability(
    program: &QuantumProgram,
    trace: &ProgramTrace,
    mode: PstMode,
) -> Result<f64, SimError> {
    let (target, _) = ideal_mode(program)?;
    match mode {
        PstMode::Exact => exact(program, trace, target),
        PstMode::Sampled { shots, seed } => sampled(program, trace, target, shots, seed),
    }
}

//! Mapping transition: the joint X-SWAP router, the per-region baseline
//! router, SWAP decomposition and the simulation-backed equivalence check.

mod router;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Gate, GateKind, QuantumProgram};
use crate::hardware::{Backend, DistanceMatrix};
use crate::sim::{self, ProgramTrace, SimError, StateVector, TraceOp};

pub use router::{baseline_route, xswap_route};

/// Total-variation distance up to which compiled and ideal outputs agree.
pub const EQUIVALENCE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("invalid mapping: {0}")]
    InvalidMapping(String),
    #[error("program {program}: gate {gate} cannot be routed inside its region")]
    Unroutable { program: usize, gate: usize },
    #[error("unreachable distance between physical qubits {0} and {1}")]
    Unreachable(usize, usize),
    #[error("schedule replay failed at event {event}: {msg}")]
    Replay { event: usize, msg: String },
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Where every program's logical qubits sit, and who owns each physical
/// qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalMapping {
    /// `sigma[p][l]` = physical qubit of logical `l` of program `p`.
    pub sigma: Vec<Vec<usize>>,
    /// `(program, logical)` on each physical qubit; `None` is free.
    occupant: Vec<Option<(usize, usize)>>,
}

impl GlobalMapping {
    pub fn new(n_physical: usize, sigma: Vec<Vec<usize>>) -> Result<Self, RoutingError> {
        let mut occupant = vec![None; n_physical];
        for (p, s) in sigma.iter().enumerate() {
            for (l, &q) in s.iter().enumerate() {
                if q >= n_physical {
                    return Err(RoutingError::InvalidMapping(format!(
                        "program {p} logical {l} on missing qubit {q}"
                    )));
                }
                if let Some((op, ol)) = occupant[q] {
                    return Err(RoutingError::InvalidMapping(format!(
                        "physical {q} holds program {op} logical {ol} and program {p} logical {l}"
                    )));
                }
                occupant[q] = Some((p, l));
            }
        }
        Ok(Self { sigma, occupant })
    }

    pub fn n_physical(&self) -> usize {
        self.occupant.len()
    }

    pub fn phys(&self, program: usize, logical: usize) -> usize {
        self.sigma[program][logical]
    }

    pub fn occupant(&self, q: usize) -> Option<(usize, usize)> {
        self.occupant[q]
    }

    pub fn owner(&self, q: usize) -> Option<usize> {
        self.occupant[q].map(|(p, _)| p)
    }

    /// Exchanges the occupants of `a` and `b`.
    pub fn apply_swap(&mut self, a: usize, b: usize) {
        let (oa, ob) = (self.occupant[a], self.occupant[b]);
        if let Some((p, l)) = oa {
            self.sigma[p][l] = b;
        }
        if let Some((p, l)) = ob {
            self.sigma[p][l] = a;
        }
        self.occupant.swap(a, b);
    }

    pub fn class_of(&self, a: usize, b: usize) -> SwapClass {
        match (self.owner(a), self.owner(b)) {
            (Some(x), Some(y)) if x == y => SwapClass::Intra { program: x },
            (Some(_), Some(_)) => SwapClass::Inter,
            _ => SwapClass::FreeInvolving,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SwapClass {
    Intra { program: usize },
    Inter,
    FreeInvolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapOp {
    pub a: usize,
    pub b: usize,
    pub class: SwapClass,
    /// Program the swap is charged to.
    pub program: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Gate {
        program: usize,
        gate: usize,
        qubits: Vec<usize>,
    },
    Swap(SwapOp),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteStats {
    pub swaps: usize,
    pub intra: usize,
    pub inter: usize,
    pub free_involving: usize,
}

impl RouteStats {
    pub fn added_cnots(&self) -> usize {
        3 * self.swaps
    }

    fn record(&mut self, class: SwapClass) {
        self.swaps += 1;
        match class {
            SwapClass::Intra { .. } => self.intra += 1,
            SwapClass::Inter => self.inter += 1,
            SwapClass::FreeInvolving => self.free_involving += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub events: Vec<Event>,
    pub initial: GlobalMapping,
    pub final_mapping: GlobalMapping,
    /// Per program, counting the swaps charged to it.
    pub stats: Vec<RouteStats>,
    /// Programs the router could not complete; none of their gates appear.
    pub failed: Vec<usize>,
}

impl Schedule {
    pub fn total_swaps(&self) -> usize {
        self.stats.iter().map(|s| s.swaps).sum()
    }

    pub fn swaps(&self) -> impl Iterator<Item = &SwapOp> {
        self.events.iter().filter_map(|e| match e {
            Event::Swap(s) => Some(s),
            Event::Gate { .. } => None,
        })
    }
}

/// Hop savings of running `(q1, q2)` on the whole chip instead of only on
/// the program's own and free qubits: `D_i′ − D`.
pub fn gain(
    q1: usize,
    q2: usize,
    d: &DistanceMatrix,
    d_i: &DistanceMatrix,
) -> Result<u32, RoutingError> {
    let full = d.get(q1, q2).ok_or(RoutingError::Unreachable(q1, q2))?;
    let own = d_i.get(q1, q2).ok_or(RoutingError::Unreachable(q1, q2))?;
    Ok(own.saturating_sub(full))
}

/// One blocked front-layer CNOT as the scorer sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontGate {
    pub p1: usize,
    pub p2: usize,
    pub gain: f64,
}

/// Every coupling edge touching an operand of a gate in `to_resolve`
/// (`(program, physical operands)` pairs), whoever owns the other end. A
/// candidate is charged to the first program that produced it.
pub fn obtain_swaps(
    to_resolve: &[(usize, [usize; 2])],
    backend: &Backend,
    mapping: &GlobalMapping,
) -> Vec<SwapOp> {
    let mut found: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &(program, operands) in to_resolve {
        for q in operands {
            for &v in backend.graph.neighbors(q) {
                found.entry((q.min(v), q.max(v))).or_insert(program);
            }
        }
    }
    found
        .into_iter()
        .map(|((a, b), program)| SwapOp {
            a,
            b,
            class: mapping.class_of(a, b),
            program,
        })
        .collect()
}

/// `H − Σ_i (1/|F_i|) Σ_{g∈F_i} gain(g)·I(swap, g)`, where `H` sums the
/// distances of every front gate after the swap and `I` marks swaps lying on
/// a shortest path of the gate. Lower is better.
///
/// The gain term is subtracted: adding it, as a literal reading of the
/// heuristic would, penalizes exactly the shortcut swaps it is meant to favor.
pub fn score(swap: (usize, usize), fronts: &[Vec<FrontGate>], d: &DistanceMatrix) -> f64 {
    let (a, b) = swap;
    let moved = |q: usize| {
        if q == a {
            b
        } else if q == b {
            a
        } else {
            q
        }
    };
    let unreachable = d.n() as f64;
    let mut h = 0.0;
    let mut bonus = 0.0;
    for front in fronts.iter().filter(|f| !f.is_empty()) {
        let mut sum = 0.0;
        for g in front {
            h += d
                .get(moved(g.p1), moved(g.p2))
                .map_or(unreachable, f64::from);
            if g.gain > 0.0 && d.on_shortest_path(a, b, g.p1, g.p2) {
                sum += g.gain;
            }
        }
        bonus += sum / front.len() as f64;
    }
    h - bonus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledStats {
    pub swaps: usize,
    pub added_cnots: usize,
    pub original_cnots: usize,
    pub original_gates: usize,
    pub cnots: usize,
    pub gates: usize,
    pub depth: usize,
}

/// Physical circuits after SWAP decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compiled {
    /// All programs on the physical register; classical bits of program `p`
    /// start at `clbit_offsets[p]`.
    pub combined: QuantumProgram,
    /// Each program's gates plus the swaps charged to it.
    pub per_program: Vec<QuantumProgram>,
    pub clbit_offsets: Vec<usize>,
    pub stats: Vec<CompiledStats>,
    pub depth: usize,
}

/// ASAP depth over all gates but barriers.
pub fn depth(program: &QuantumProgram) -> usize {
    let mut level = vec![0usize; program.n_qubits];
    for g in program.gates.iter().filter(|g| g.kind != GateKind::Barrier) {
        let l = g.qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for &q in &g.qubits {
            level[q] = l;
        }
    }
    level.into_iter().max().unwrap_or(0)
}

fn cx(a: usize, b: usize) -> Gate {
    Gate {
        kind: GateKind::Cx,
        qubits: vec![a, b],
        params: Vec::new(),
        clbit: None,
        id: 0,
    }
}

/// Replays `schedule` from its initial mapping, checking every gate's
/// operands and adjacency, and expands each SWAP into three CNOTs.
pub fn decompose(
    programs: &[QuantumProgram],
    schedule: &Schedule,
    backend: &Backend,
) -> Result<Compiled, RoutingError> {
    let n = backend.n_qubits();
    let mut offsets = Vec::with_capacity(programs.len());
    let mut total_bits = 0;
    for p in programs {
        offsets.push(total_bits);
        total_bits += p.n_outcome_bits();
    }
    let mut mapping = schedule.initial.clone();
    let mut combined = Vec::new();
    let mut per: Vec<Vec<Gate>> = vec![Vec::new(); programs.len()];
    for (i, event) in schedule.events.iter().enumerate() {
        let fail = |msg: String| RoutingError::Replay { event: i, msg };
        match event {
            Event::Gate {
                program,
                gate,
                qubits,
            } => {
                let g = &programs[*program].gates[*gate];
                let expect: Vec<usize> = g
                    .qubits
                    .iter()
                    .map(|&l| mapping.phys(*program, l))
                    .collect();
                if &expect != qubits {
                    return Err(fail(format!(
                        "operands {qubits:?}, mapping says {expect:?}"
                    )));
                }
                if g.is_cnot() && !backend.graph.is_edge(qubits[0], qubits[1]) {
                    return Err(fail(format!("cx on non-adjacent {qubits:?}")));
                }
                let mut phys = g.clone();
                phys.qubits = qubits.clone();
                per[*program].push(phys.clone());
                phys.clbit = g.clbit.map(|c| c + offsets[*program]);
                combined.push(phys);
            }
            Event::Swap(s) => {
                if !backend.graph.is_edge(s.a, s.b) {
                    return Err(fail(format!("swap on non-edge ({}, {})", s.a, s.b)));
                }
                for (x, y) in [(s.a, s.b), (s.b, s.a), (s.a, s.b)] {
                    combined.push(cx(x, y));
                    per[s.program].push(cx(x, y));
                }
                mapping.apply_swap(s.a, s.b);
            }
        }
    }
    if mapping != schedule.final_mapping {
        return Err(RoutingError::Replay {
            event: schedule.events.len(),
            msg: "final mapping differs from the replayed swaps".into(),
        });
    }
    let per_program: Vec<QuantumProgram> = per
        .into_iter()
        .zip(programs)
        .map(|(gates, p)| QuantumProgram::new(p.name.clone(), n, p.n_clbits, gates))
        .collect();
    let stats = programs
        .iter()
        .zip(&per_program)
        .zip(&schedule.stats)
        .map(|((orig, comp), rs)| CompiledStats {
            swaps: rs.swaps,
            added_cnots: rs.added_cnots(),
            original_cnots: orig.n_cnot,
            original_gates: orig.n_gates(),
            cnots: orig.n_cnot + rs.added_cnots(),
            gates: orig.n_gates() + rs.added_cnots(),
            depth: depth(comp),
        })
        .collect();
    let combined = QuantumProgram::new("combined", n, total_bits, combined);
    Ok(Compiled {
        depth: depth(&combined),
        combined,
        per_program,
        clbit_offsets: offsets,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub passed: bool,
    /// Total-variation distance between compiled and ideal outputs.
    pub deviation: f64,
    pub simulated_qubits: usize,
}

/// Simulates the compiled circuit on the physical qubits it touches and
/// compares the outcome distribution, read through the final layout, with
/// the product of every program's ideal distribution. Qubits left without an
/// occupant must end in `|0⟩`. Programs listed as failed are treated as
/// absent.
pub fn verify_equivalence(
    programs: &[QuantumProgram],
    compiled: &Compiled,
    schedule: &Schedule,
    cap: usize,
) -> Result<Equivalence, RoutingError> {
    let failed: BTreeSet<usize> = schedule.failed.iter().copied().collect();
    let live = |p: usize| !failed.contains(&p);
    let mut active: BTreeSet<usize> = compiled
        .combined
        .gates
        .iter()
        .flat_map(|g| g.qubits.iter().copied())
        .collect();
    for (p, s) in schedule.final_mapping.sigma.iter().enumerate() {
        if live(p) {
            active.extend(s.iter().copied());
        }
    }
    let cap = cap.min(sim::HARD_CAP);
    if active.len() > cap {
        return Err(SimError::CapExceeded {
            n: active.len(),
            cap,
        }
        .into());
    }
    let compact: BTreeMap<usize, usize> = active.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut sv = StateVector::new(active.len())?;
    for g in &compiled.combined.gates {
        if matches!(g.kind, GateKind::Measure | GateKind::Barrier) {
            continue;
        }
        let qubits: Vec<usize> = g.qubits.iter().map(|q| compact[q]).collect();
        sv.apply(g.kind, &qubits, &g.params)?;
    }

    let mut bits = Vec::new();
    let mut offset = 0;
    let mut expected: BTreeMap<u64, f64> = BTreeMap::from([(0, 1.0)]);
    let mut occupied = BTreeSet::new();
    for (p, program) in programs.iter().enumerate().filter(|&(p, _)| live(p)) {
        for (l, b) in program.readout_map() {
            bits.push((compact[&schedule.final_mapping.phys(p, l)], offset + b));
        }
        occupied.extend(schedule.final_mapping.sigma[p].iter().copied());
        let ideal = sim::output_distribution(program, sim::HARD_CAP)?;
        let mut next = BTreeMap::new();
        for (&k, &pk) in &expected {
            for (&o, &po) in &ideal {
                *next.entry(k | o << offset).or_insert(0.0) += pk * po;
            }
        }
        expected = next;
        offset += program.n_outcome_bits();
    }
    for &q in active.iter().filter(|q| !occupied.contains(q)) {
        bits.push((compact[&q], offset));
        offset += 1;
    }
    let got = sim::marginal(&sv.probabilities(), &bits);
    let keys: BTreeSet<u64> = got.keys().chain(expected.keys()).copied().collect();
    let deviation = 0.5
        * keys
            .iter()
            .map(|k| (got.get(k).unwrap_or(&0.0) - expected.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>();
    Ok(Equivalence {
        passed: deviation <= EQUIVALENCE_TOL,
        deviation,
        simulated_qubits: active.len(),
    })
}

/// Per-program execution traces in the logical frame with the calibration
/// error of the physical resources each step used. Every SWAP contributes
/// three CNOT faults to each program it moves a qubit of.
pub fn noise_traces(
    programs: &[QuantumProgram],
    schedule: &Schedule,
    backend: &Backend,
) -> Vec<ProgramTrace> {
    let calib = &backend.calib;
    let mut traces = vec![ProgramTrace::default(); programs.len()];
    let mut mapping = schedule.initial.clone();
    for event in &schedule.events {
        match event {
            Event::Gate {
                program,
                gate,
                qubits,
            } => {
                let g = &programs[*program].gates[*gate];
                let error = match g.kind {
                    GateKind::Cx => calib.cnot(qubits[0], qubits[1]),
                    GateKind::Measure | GateKind::Barrier => 0.0,
                    _ => calib.oneq_error[qubits[0]],
                };
                traces[*program].ops.push(TraceOp::Gate {
                    gate: g.clone(),
                    error,
                });
            }
            Event::Swap(s) => {
                let mut touched: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for q in [s.a, s.b] {
                    if let Some((p, l)) = mapping.occupant(q) {
                        touched.entry(p).or_default().push(l);
                    }
                }
                let error = calib.cnot(s.a, s.b);
                for (p, qubits) in touched {
                    for _ in 0..3 {
                        traces[p].ops.push(TraceOp::Fault {
                            qubits: qubits.clone(),
                            error,
                        });
                    }
                }
                mapping.apply_swap(s.a, s.b);
            }
        }
    }
    for (p, program) in programs.iter().enumerate() {
        for (l, _) in program.readout_map() {
            traces[p]
                .readout_error
                .insert(l, calib.readout_error[mapping.phys(p, l)]);
        }
    }
    traces
}

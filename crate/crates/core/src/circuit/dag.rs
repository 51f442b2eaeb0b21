use std::collections::BTreeSet;

use super::{GateKind, QuantumProgram};

/// Data-dependency DAG of a program. Node `i` is the gate with id `i`.
///
/// An edge `u -> v` exists iff `u` is the nearest gate preceding `v` on one of
/// `v`'s qubits. Barriers are nodes without edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    kinds: Vec<GateKind>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl Dag {
    pub fn build(program: &QuantumProgram) -> Self {
        let n = program.gates.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut last: Vec<Option<usize>> = vec![None; program.n_qubits];
        for g in &program.gates {
            if g.kind == GateKind::Barrier {
                continue;
            }
            for &q in &g.qubits {
                if let Some(p) = last[q] {
                    if !preds[g.id].contains(&p) {
                        preds[g.id].push(p);
                        succs[p].push(g.id);
                    }
                }
                last[q] = Some(g.id);
            }
        }
        Self {
            kinds: program.gates.iter().map(|g| g.kind).collect(),
            preds,
            succs,
        }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, id: usize) -> GateKind {
        self.kinds[id]
    }

    pub fn predecessors(&self, id: usize) -> &[usize] {
        &self.preds[id]
    }

    pub fn successors(&self, id: usize) -> &[usize] {
        &self.succs[id]
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.preds[id].len()
    }

    /// All edges as `(from, to)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .succs
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
            .collect();
        e.sort_unstable();
        e
    }

    /// Whether `id` has a successor that belongs to a later dependency layer.
    /// Measures are pinned to the end of the schedule and do not count.
    pub fn has_layer_successor(&self, id: usize) -> bool {
        self.succs[id]
            .iter()
            .any(|&s| self.kinds[s] != GateKind::Measure)
    }
}

/// CNOTs whose predecessors are all executed and which are not executed
/// themselves.
pub fn front_layer(dag: &Dag, executed: &BTreeSet<usize>) -> BTreeSet<usize> {
    (0..dag.len())
        .filter(|&g| dag.kind(g) == GateKind::Cx && !executed.contains(&g))
        .filter(|&g| dag.predecessors(g).iter().all(|p| executed.contains(p)))
        .collect()
}

/// The members of `front` that have a successor in the next dependency layer.
pub fn critical_gates(dag: &Dag, front: &BTreeSet<usize>) -> BTreeSet<usize> {
    front
        .iter()
        .copied()
        .filter(|&g| dag.has_layer_successor(g))
        .collect()
}

//! Qubit partitioning among concurrent programs: the community hierarchy
//! tree, region selection over it, the greedy FRP baseline and the initial
//! layout (GWEF) inside a region.

mod alloc;
mod tree;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::QuantumProgram;
use crate::hardware::Backend;

pub use alloc::{allocate, frp_partition};
pub use tree::{
    average_redundancy, build_hierarchy_tree, max_redundant_qubits, merge_reward, modularity,
    HierarchyNode, HierarchyTree,
};

/// Default weight of the calibration term in the merge reward.
pub const DEFAULT_OMEGA: f64 = 0.95;

const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("coupling graph has no edges")]
    EmptyGraph,
    #[error("coupling graph is disconnected")]
    Disconnected,
    #[error("node {0} is a leaf")]
    Leaf(usize),
    #[error("no programs to partition")]
    NoPrograms,
    #[error("region of {available} qubits cannot host {needed} logical qubits")]
    RegionTooSmall { needed: usize, available: usize },
}

/// Logical → physical layout of one program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialMapping {
    pub sigma: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Index into the program list handed to the partitioner.
    pub program: usize,
    /// Qubits allocated to the program (sorted, exactly `n_qubits` of them).
    pub region: Vec<usize>,
    /// Alive qubits of the winning candidate when it was chosen.
    pub candidate: Vec<usize>,
    /// Pooled average fidelity of the candidate.
    pub fidelity: f64,
    pub mapping: InitialMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// In processing order.
    pub assignments: Vec<Assignment>,
    /// Programs that found no region and must run on their own.
    pub unassigned: Vec<usize>,
    /// Qubits of sibling subtrees detached from their parent because they
    /// lost every link to the rest of the alive chip. They stay allocatable
    /// inside their own subtree only.
    pub detached: Vec<usize>,
}

impl Partition {
    pub fn assignment(&self, program: usize) -> Option<&Assignment> {
        self.assignments.iter().find(|a| a.program == program)
    }
}

/// Processing order: descending CNOT density, then more qubits, then name.
pub fn priority_order(programs: &[QuantumProgram]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..programs.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&programs[a], &programs[b]);
        pb.cnot_density()
            .total_cmp(&pa.cnot_density())
            .then(pb.n_qubits.cmp(&pa.n_qubits))
            .then(pa.name.cmp(&pb.name))
            .then(a.cmp(&b))
    });
    order
}

/// Mean of CNOT fidelities over edges inside `qubits` pooled with the readout
/// fidelities of `qubits`.
pub fn region_fidelity(qubits: &BTreeSet<usize>, backend: &Backend) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(a, b) in backend.graph.edges() {
        if qubits.contains(&a) && qubits.contains(&b) {
            sum += backend.calib.cnot_fidelity(a, b);
            count += 1;
        }
    }
    for &q in qubits {
        sum += backend.calib.readout_fidelity(q);
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Candidate nodes for a program of `need` qubits: from every alive leaf,
/// climb toward its (possibly detached) root to the first node with enough
/// alive qubits.
fn candidates(tree: &HierarchyTree, need: usize) -> BTreeSet<usize> {
    let mut found = BTreeSet::new();
    for leaf in tree
        .nodes
        .iter()
        .filter(|n| n.is_leaf() && !n.alive.is_empty())
    {
        let mut id = leaf.id;
        loop {
            if tree.nodes[id].alive.len() >= need {
                found.insert(id);
                break;
            }
            match tree.nodes[id].parent {
                Some(p) => id = p,
                None => break,
            }
        }
    }
    found
}

fn remove_everywhere(tree: &mut HierarchyTree, qubits: &[usize]) {
    for node in &mut tree.nodes {
        for q in qubits {
            node.alive.remove(q);
        }
    }
}

fn remove_from_ancestors(tree: &mut HierarchyTree, node: usize, qubits: &[usize]) {
    let mut cur = tree.nodes[node].parent;
    while let Some(id) = cur {
        for q in qubits {
            tree.nodes[id].alive.remove(q);
        }
        cur = tree.nodes[id].parent;
    }
}

/// Assigns a disjoint region and initial layout to each program by walking
/// the hierarchy tree. The tree is cloned; the caller's copy is untouched.
pub fn partition_qubits(
    tree: &HierarchyTree,
    programs: &[QuantumProgram],
    backend: &Backend,
) -> Result<Partition, PartitionError> {
    if programs.is_empty() {
        return Err(PartitionError::NoPrograms);
    }
    let mut tree = tree.clone();
    let mut partition = Partition {
        assignments: Vec::new(),
        unassigned: Vec::new(),
        detached: Vec::new(),
    };
    for p in priority_order(programs) {
        let program = &programs[p];
        let need = program.n_qubits;
        let mut best: Option<(f64, Vec<usize>, usize)> = None;
        for id in candidates(&tree, need) {
            let alive = &tree.nodes[id].alive;
            let f = region_fidelity(alive, backend);
            let key: Vec<usize> = alive.iter().copied().collect();
            let better = match &best {
                None => true,
                Some((bf, bkey, _)) => {
                    f > bf + TIE_EPS || ((f - bf).abs() <= TIE_EPS && key < *bkey)
                }
            };
            if better {
                best = Some((f, key, id));
            }
        }
        let Some((fidelity, candidate, winner)) = best else {
            partition.unassigned.push(p);
            continue;
        };
        let mapping = allocate(program, &candidate, backend)?;
        let mut region = mapping.sigma.clone();
        region.sort_unstable();
        remove_everywhere(&mut tree, &region);

        if let Some(parent) = tree.nodes[winner].parent {
            let pn = &tree.nodes[parent];
            let sibling = if pn.left == Some(winner) {
                pn.right
            } else {
                pn.left
            };
            if let Some(s) = sibling {
                let sib_alive = tree.nodes[s].alive.clone();
                let alive_anywhere: BTreeSet<usize> = tree
                    .nodes
                    .iter()
                    .filter(|n| n.is_leaf())
                    .flat_map(|n| n.alive.iter().copied())
                    .collect();
                let connected = sib_alive.iter().any(|&q| {
                    backend
                        .graph
                        .neighbors(q)
                        .iter()
                        .any(|v| alive_anywhere.contains(v) && !sib_alive.contains(v))
                });
                if !sib_alive.is_empty() && !connected {
                    let cut: Vec<usize> = sib_alive.into_iter().collect();
                    remove_from_ancestors(&mut tree, s, &cut);
                    tree.nodes[s].parent = None;
                    partition.detached.extend(cut);
                }
            }
        }
        partition.assignments.push(Assignment {
            program: p,
            region,
            candidate,
            fidelity,
            mapping,
        });
    }
    partition.detached.sort_unstable();
    Ok(partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_program;
    use crate::hardware::{Calibration, CouplingGraph};

    fn prog(name: &str, n: usize, cx: &[(usize, usize)]) -> QuantumProgram {
        let mut src = format!("OPENQASM 2.0;\nqreg q[{n}];\n");
        for (a, b) in cx {
            src.push_str(&format!("cx q[{a}],q[{b}];\n"));
        }
        parse_program(name, &src).unwrap()
    }

    fn uniform(n: usize, edges: &[(usize, usize)]) -> Backend {
        let g = CouplingGraph::new(n, edges).unwrap();
        let c = Calibration::uniform(&g, 0.01, 0.02, 0.001);
        Backend::new("u", g, c).unwrap()
    }

    #[test]
    fn two_pairs_on_a_path() {
        let b = uniform(4, &[(0, 1), (1, 2), (2, 3)]);
        for omega in [0.0, 0.95, 5.0] {
            let tree = build_hierarchy_tree(&b, omega).unwrap();
            let progs = [prog("a", 2, &[(0, 1)]), prog("b", 2, &[(0, 1)])];
            let part = partition_qubits(&tree, &progs, &b).unwrap();
            let regions: Vec<Vec<usize>> =
                part.assignments.iter().map(|a| a.region.clone()).collect();
            assert_eq!(regions, vec![vec![0, 1], vec![2, 3]]);
            assert!(part.unassigned.is_empty());
        }
    }

    #[test]
    fn oversized_program_is_unassigned() {
        let b = uniform(3, &[(0, 1), (1, 2)]);
        let tree = build_hierarchy_tree(&b, 0.95).unwrap();
        let part = partition_qubits(&tree, &[prog("big", 4, &[(0, 3)])], &b).unwrap();
        assert_eq!(part.unassigned, vec![0]);
        assert!(matches!(
            partition_qubits(&tree, &[], &b),
            Err(PartitionError::NoPrograms)
        ));
    }

    #[test]
    fn priority_prefers_dense_then_wide_then_name() {
        let progs = [
            prog("c", 2, &[(0, 1)]),
            prog("b", 4, &[(0, 1), (2, 3)]),
            prog("a", 2, &[(0, 1)]),
            prog("d", 2, &[(0, 1), (0, 1)]),
        ];
        assert_eq!(priority_order(&progs), vec![3, 1, 2, 0]);
    }
}

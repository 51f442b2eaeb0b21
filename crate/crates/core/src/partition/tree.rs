use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::PartitionError;
use crate::hardware::{Backend, CouplingGraph};

/// Rewards closer than this are treated as tied.
const TIE_EPS: f64 = 1e-12;

/// Newman modularity `Σ_i (e_ii − a_i²)` of `grouping` (qubit → group id).
pub fn modularity(grouping: &[usize], graph: &CouplingGraph) -> Result<f64, PartitionError> {
    let m = graph.edges().len();
    if m == 0 {
        return Err(PartitionError::EmptyGraph);
    }
    let groups = grouping.iter().copied().max().map_or(0, |g| g + 1);
    let mut inside = vec![0usize; groups];
    let mut ends = vec![0usize; groups];
    for &(a, b) in graph.edges() {
        let (ga, gb) = (grouping[a], grouping[b]);
        if ga == gb {
            inside[ga] += 1;
        }
        ends[ga] += 1;
        ends[gb] += 1;
    }
    let m = m as f64;
    Ok(inside
        .iter()
        .zip(&ends)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum())
}

/// Reward `F = Q_merged − Q_origin + ω·E·V` for merging communities `a` and
/// `b` under `grouping`. `None` when no edge connects them.
pub fn merge_reward(
    a: &[usize],
    b: &[usize],
    grouping: &[usize],
    backend: &Backend,
    omega: f64,
) -> Result<Option<f64>, PartitionError> {
    let in_a: BTreeSet<usize> = a.iter().copied().collect();
    let in_b: BTreeSet<usize> = b.iter().copied().collect();
    let between: Vec<(usize, usize)> = backend
        .graph
        .edges()
        .iter()
        .copied()
        .filter(|&(x, y)| {
            (in_a.contains(&x) && in_b.contains(&y)) || (in_a.contains(&y) && in_b.contains(&x))
        })
        .collect();
    if between.is_empty() {
        return Ok(None);
    }
    let e = between
        .iter()
        .map(|&(x, y)| backend.calib.cnot_fidelity(x, y))
        .sum::<f64>()
        / between.len() as f64;
    let endpoints: BTreeSet<usize> = between.iter().flat_map(|&(x, y)| [x, y]).collect();
    let v = endpoints
        .iter()
        .map(|&q| backend.calib.readout_fidelity(q))
        .sum::<f64>()
        / endpoints.len() as f64;

    let origin = modularity(grouping, &backend.graph)?;
    let target = grouping[b[0]];
    let merged_into = grouping[a[0]];
    let merged: Vec<usize> = grouping
        .iter()
        .map(|&g| if g == target { merged_into } else { g })
        .collect();
    let q_merged = modularity(&merged, &backend.graph)?;
    Ok(Some(q_merged - origin + omega * e * v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub id: usize,
    /// Sorted physical qubits of the community.
    pub qubits: Vec<usize>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub parent: Option<usize>,
    /// Qubits not yet allocated or pruned.
    pub alive: BTreeSet<usize>,
    /// 0-based merge index; `None` for leaves.
    pub merge_step: Option<usize>,
    /// F value at the merge that created the node.
    pub reward: Option<f64>,
}

impl HierarchyNode {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none()
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }
}

/// Arena dendrogram: nodes `0..n` are the leaves of qubits `0..n`, internal
/// nodes follow in merge order and the last node is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyTree {
    pub nodes: Vec<HierarchyNode>,
    pub root: usize,
    pub omega: f64,
}

impl HierarchyTree {
    pub fn n_qubits(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaf(&self, qubit: usize) -> &HierarchyNode {
        &self.nodes[qubit]
    }

    pub fn node(&self, id: usize) -> &HierarchyNode {
        &self.nodes[id]
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    /// Qubit sets of the internal nodes in merge order.
    pub fn merge_order(&self) -> Vec<Vec<usize>> {
        let mut internal: Vec<&HierarchyNode> = self.internal_nodes().collect();
        internal.sort_by_key(|n| n.merge_step);
        internal.into_iter().map(|n| n.qubits.clone()).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph hierarchy {\n  node [shape=box];\n");
        for n in &self.nodes {
            let set: Vec<String> = n.qubits.iter().map(|q| q.to_string()).collect();
            let label = match n.reward {
                Some(f) => format!(
                    "{{{}}}\\nstep {} F={f:.4}",
                    set.join(","),
                    n.merge_step.unwrap_or(0)
                ),
                None => format!("q{}", n.qubits[0]),
            };
            let _ = writeln!(out, "  n{} [label=\"{label}\"];", n.id);
        }
        for n in &self.nodes {
            for child in [n.left, n.right].into_iter().flatten() {
                let _ = writeln!(out, "  n{} -- n{child};", n.id);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Agglomerative construction: repeatedly merge the pair of top-level
/// communities with the largest reward. Ties go to the lexicographically
/// smallest (min qubit of A, min qubit of B); the child with the smaller min
/// qubit becomes the left subtree.
pub fn build_hierarchy_tree(
    backend: &Backend,
    omega: f64,
) -> Result<HierarchyTree, PartitionError> {
    let n = backend.n_qubits();
    if backend.graph.edges().is_empty() {
        return Err(PartitionError::EmptyGraph);
    }
    let mut nodes: Vec<HierarchyNode> = (0..n)
        .map(|q| HierarchyNode {
            id: q,
            qubits: vec![q],
            left: None,
            right: None,
            parent: None,
            alive: BTreeSet::from([q]),
            merge_step: None,
            reward: None,
        })
        .collect();
    // Top-level community node ids, kept sorted by min qubit.
    let mut top: Vec<usize> = (0..n).collect();
    let mut grouping: Vec<usize> = (0..n).collect();

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..top.len() {
            for j in i + 1..top.len() {
                let (a, b) = (&nodes[top[i]].qubits, &nodes[top[j]].qubits);
                let Some(f) = merge_reward(a, b, &grouping, backend, omega)? else {
                    continue;
                };
                if best.map_or(true, |(bf, _, _)| f > bf + TIE_EPS) {
                    best = Some((f, i, j));
                }
            }
        }
        let (f, i, j) = best.ok_or(PartitionError::Disconnected)?;
        let (l, r) = (top[i], top[j]);
        let id = nodes.len();
        let mut qubits: Vec<usize> = nodes[l]
            .qubits
            .iter()
            .chain(&nodes[r].qubits)
            .copied()
            .collect();
        qubits.sort_unstable();
        for &q in &nodes[r].qubits {
            grouping[q] = grouping[nodes[l].qubits[0]];
        }
        nodes[l].parent = Some(id);
        nodes[r].parent = Some(id);
        nodes.push(HierarchyNode {
            id,
            alive: qubits.iter().copied().collect(),
            qubits,
            left: Some(l),
            right: Some(r),
            parent: None,
            merge_step: Some(step),
            reward: Some(f),
        });
        top[i] = id;
        top.remove(j);
    }
    let root = nodes.len() - 1;
    Ok(HierarchyTree { nodes, root, omega })
}

/// `n − (1 + max(left.n, right.n))`: qubits a program sized just above the
/// larger child would leave unused in this node.
pub fn max_redundant_qubits(tree: &HierarchyTree, node: usize) -> Result<usize, PartitionError> {
    let nd = tree.node(node);
    let (Some(l), Some(r)) = (nd.left, nd.right) else {
        return Err(PartitionError::Leaf(node));
    };
    let larger = tree.node(l).n_qubits().max(tree.node(r).n_qubits());
    Ok(nd.n_qubits() - (1 + larger))
}

/// Mean of [`max_redundant_qubits`] over the internal nodes.
pub fn average_redundancy(tree: &HierarchyTree) -> Result<f64, PartitionError> {
    let ids: Vec<usize> = tree.internal_nodes().map(|n| n.id).collect();
    if ids.is_empty() {
        return Err(PartitionError::Leaf(tree.root));
    }
    let total = ids
        .iter()
        .map(|&id| max_redundant_qubits(tree, id))
        .sum::<Result<usize, _>>()?;
    Ok(total as f64 / ids.len() as f64)
}

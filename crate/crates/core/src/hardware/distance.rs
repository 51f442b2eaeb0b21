use std::collections::VecDeque;

use super::CouplingGraph;

/// All-pairs hop counts. Pairs with no path inside the allowed set hold the
/// unreachable marker and [`DistanceMatrix::get`] returns `None` for them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> Option<u32> {
        self.dist[a * self.n + b]
    }

    /// Whether edge `(a, b)` lies on some shortest path between `x` and `y`.
    pub fn on_shortest_path(&self, a: usize, b: usize, x: usize, y: usize) -> bool {
        let Some(total) = self.get(x, y) else {
            return false;
        };
        let via = |p: usize, q: usize| match (self.get(x, p), self.get(q, y)) {
            (Some(d1), Some(d2)) => d1 + 1 + d2 == total,
            _ => false,
        };
        via(a, b) || via(b, a)
    }
}

/// Unweighted BFS distances inside the subgraph induced by `allowed`
/// (all qubits when `None`).
pub fn shortest_paths(graph: &CouplingGraph, allowed: Option<&[bool]>) -> DistanceMatrix {
    let n = graph.n_qubits();
    let ok = |q: usize| allowed.map_or(true, |mask| mask[q]);
    let mut dist = vec![None; n * n];
    let mut queue = VecDeque::new();
    for src in (0..n).filter(|&q| ok(q)) {
        let row = &mut dist[src * n..(src + 1) * n];
        row[src] = Some(0);
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = row[u].unwrap_or(0);
            for &v in graph.neighbors(u) {
                if ok(v) && row[v].is_none() {
                    row[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    DistanceMatrix { n, dist }
}

/// A shortest path `from -> to` inside `allowed`, lowest-index neighbors first.
pub(crate) fn shortest_path(
    graph: &CouplingGraph,
    allowed: Option<&[bool]>,
    from: usize,
    to: usize,
) -> Option<Vec<usize>> {
    let n = graph.n_qubits();
    let ok = |q: usize| allowed.map_or(true, |mask| mask[q]);
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &v in graph.neighbors(u) {
            if ok(v) && !seen[v] {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

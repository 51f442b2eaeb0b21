use std::collections::{BTreeSet, VecDeque};

use super::{
    priority_order, region_fidelity, Assignment, InitialMapping, Partition, PartitionError,
};
use crate::circuit::QuantumProgram;
use crate::hardware::Backend;

const UTILITY_EPS: f64 = 1e-12;

/// Hop distances from `src` inside `allowed`, falling back to the whole chip
/// for qubits the restricted search cannot reach.
fn hops_from(backend: &Backend, src: usize, allowed: &BTreeSet<usize>) -> Vec<usize> {
    let bfs = |restrict: bool| {
        let n = backend.n_qubits();
        let mut dist = vec![usize::MAX; n];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in backend.graph.neighbors(u) {
                if dist[v] == usize::MAX && (!restrict || allowed.contains(&v)) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    };
    let inner = bfs(true);
    let outer = bfs(false);
    inner
        .iter()
        .zip(&outer)
        .map(|(&i, &o)| {
            if i == usize::MAX {
                backend.n_qubits() + o
            } else {
                i
            }
        })
        .collect()
}

/// Greatest Weighted Edge First layout of `program` inside `region`.
///
/// The heaviest logical pair lands on the region's most reliable free edge;
/// each further pair with one placed endpoint pulls its other endpoint onto
/// the best adjacent free qubit. Qubits without CNOTs take what is left,
/// best readout first. Ties go to the lowest index.
pub fn allocate(
    program: &QuantumProgram,
    region: &[usize],
    backend: &Backend,
) -> Result<InitialMapping, PartitionError> {
    let n = program.n_qubits;
    if region.len() < n {
        return Err(PartitionError::RegionTooSmall {
            needed: n,
            available: region.len(),
        });
    }
    let calib = &backend.calib;
    let region_set: BTreeSet<usize> = region.iter().copied().collect();
    let weights = program.interaction_weights();
    let mut wdeg = vec![0usize; n];
    for &((a, b), w) in &weights {
        wdeg[a] += w;
        wdeg[b] += w;
    }
    let mut sigma: Vec<Option<usize>> = vec![None; n];
    let mut free = region_set.clone();

    // Heaviest edge first; BTreeMap order already gives lowest (a, b) on ties.
    let heaviest = |pred: &dyn Fn(usize, usize) -> bool| {
        weights
            .iter()
            .filter(|((a, b), _)| pred(*a, *b))
            .fold(
                None,
                |best: Option<((usize, usize), usize)>, &(e, w)| match best {
                    Some((_, bw)) if bw >= w => best,
                    _ => Some((e, w)),
                },
            )
            .map(|(e, _)| e)
    };

    loop {
        let placed = |q: usize| sigma[q].is_some();
        if let Some((a, b)) = heaviest(&|a, b| placed(a) != placed(b)) {
            let (anchor, loose) = if placed(a) { (a, b) } else { (b, a) };
            let pa = sigma[anchor].unwrap_or(0);
            let adjacent = backend
                .graph
                .neighbors(pa)
                .iter()
                .copied()
                .filter(|q| free.contains(q))
                .fold(None, |best: Option<usize>, q| match best {
                    Some(bq) if calib.cnot_fidelity(pa, bq) >= calib.cnot_fidelity(pa, q) => best,
                    _ => Some(q),
                });
            let target = adjacent.unwrap_or_else(|| {
                let hops = hops_from(backend, pa, &region_set);
                *free.iter().min_by_key(|&&q| (hops[q], q)).unwrap_or(&0)
            });
            sigma[loose] = Some(target);
            free.remove(&target);
            continue;
        }
        let Some((a, b)) = heaviest(&|a, b| !placed(a) && !placed(b)) else {
            break;
        };
        let best_edge = backend
            .graph
            .edges()
            .iter()
            .copied()
            .filter(|(x, y)| free.contains(x) && free.contains(y))
            .fold(None, |best: Option<(usize, usize)>, (x, y)| match best {
                Some((bx, by)) if calib.cnot_fidelity(bx, by) >= calib.cnot_fidelity(x, y) => best,
                _ => Some((x, y)),
            });
        // The logical endpoint with the larger weighted degree goes to the
        // physical endpoint with the better readout.
        let (heavy, light) = if wdeg[b] > wdeg[a] { (b, a) } else { (a, b) };
        match best_edge {
            Some((x, y)) => {
                let (rx, ry) = (calib.readout_fidelity(x), calib.readout_fidelity(y));
                if wdeg[a] == wdeg[b] || rx == ry {
                    sigma[a] = Some(x);
                    sigma[b] = Some(y);
                } else {
                    let (good, other) = if ry > rx { (y, x) } else { (x, y) };
                    sigma[heavy] = Some(good);
                    sigma[light] = Some(other);
                }
                free.remove(&x);
                free.remove(&y);
            }
            None => {
                let q = best_readout(&free, backend);
                sigma[heavy] = Some(q);
                free.remove(&q);
            }
        }
    }

    let mut rest: Vec<usize> = free.into_iter().collect();
    rest.sort_by(|&x, &y| {
        calib
            .readout_fidelity(y)
            .total_cmp(&calib.readout_fidelity(x))
            .then(x.cmp(&y))
    });
    let mut rest = rest.into_iter();
    let sigma = sigma
        .into_iter()
        .map(|s| s.or_else(|| rest.next()).unwrap_or(0))
        .collect();
    Ok(InitialMapping { sigma })
}

fn best_readout(free: &BTreeSet<usize>, backend: &Backend) -> usize {
    free.iter()
        .copied()
        .fold(None, |best: Option<usize>, q| match best {
            Some(b) if backend.calib.readout_fidelity(b) >= backend.calib.readout_fidelity(q) => {
                best
            }
            _ => Some(q),
        })
        .unwrap_or(0)
}

/// Greedy Fair and Reliable Partitioning baseline. A qubit's utility is the
/// number of its links to free qubits divided by the summed CNOT error of
/// those links. Each region starts at the free qubit of highest utility and
/// grows by the adjacent free qubit of highest utility.
pub fn frp_partition(
    programs: &[QuantumProgram],
    backend: &Backend,
) -> Result<Partition, PartitionError> {
    if programs.is_empty() {
        return Err(PartitionError::NoPrograms);
    }
    let mut free: BTreeSet<usize> = (0..backend.n_qubits()).collect();
    let mut partition = Partition {
        assignments: Vec::new(),
        unassigned: Vec::new(),
        detached: Vec::new(),
    };
    for p in priority_order(programs) {
        let program = &programs[p];
        let utility: Vec<f64> = (0..backend.n_qubits())
            .map(|q| {
                let links: Vec<usize> = backend
                    .graph
                    .neighbors(q)
                    .iter()
                    .copied()
                    .filter(|v| free.contains(v))
                    .collect();
                let err: f64 = links.iter().map(|&v| backend.calib.cnot(q, v)).sum();
                links.len() as f64 / err.max(UTILITY_EPS)
            })
            .collect();
        let pick = |pool: &mut dyn Iterator<Item = usize>| {
            pool.fold(None, |best: Option<usize>, q| match best {
                Some(b) if utility[b] >= utility[q] => best,
                _ => Some(q),
            })
        };
        let Some(root) = pick(&mut free.iter().copied()) else {
            partition.unassigned.push(p);
            continue;
        };
        let mut region = BTreeSet::from([root]);
        while region.len() < program.n_qubits {
            let frontier: BTreeSet<usize> = region
                .iter()
                .flat_map(|&q| backend.graph.neighbors(q).iter().copied())
                .filter(|q| free.contains(q) && !region.contains(q))
                .collect();
            match pick(&mut frontier.into_iter()) {
                Some(q) => {
                    region.insert(q);
                }
                None => break,
            }
        }
        if region.len() < program.n_qubits {
            partition.unassigned.push(p);
            continue;
        }
        let candidate: Vec<usize> = region.iter().copied().collect();
        let mapping = allocate(program, &candidate, backend)?;
        for q in &candidate {
            free.remove(q);
        }
        partition.assignments.push(Assignment {
            program: p,
            region: candidate.clone(),
            candidate,
            fidelity: region_fidelity(&region, backend),
            mapping,
        });
    }
    Ok(partition)
}

use std::collections::{BTreeSet, HashMap};

use super::{
    gain, obtain_swaps, score, Event, FrontGate, GlobalMapping, RouteStats, RoutingError, Schedule,
    SwapOp,
};
use crate::circuit::{Dag, GateKind, QuantumProgram};
use crate::hardware::{shortest_path, shortest_paths, Backend, DistanceMatrix};

/// Scores closer than this are tied; ties keep the lowest edge.
const SCORE_EPS: f64 = 1e-9;

struct Progress {
    dag: Dag,
    pending: Vec<usize>,
    ready: BTreeSet<usize>,
    left: usize,
}

impl Progress {
    fn new(program: &QuantumProgram) -> Self {
        let dag = Dag::build(program);
        let pending: Vec<usize> = (0..dag.len()).map(|g| dag.in_degree(g)).collect();
        let ready = (0..dag.len())
            .filter(|&g| pending[g] == 0 && dag.kind(g) != GateKind::Measure)
            .collect();
        let left = (0..dag.len())
            .filter(|&g| dag.kind(g) != GateKind::Measure)
            .count();
        Self {
            dag,
            pending,
            ready,
            left,
        }
    }

    fn finish(&mut self, g: usize) {
        self.ready.remove(&g);
        self.left -= 1;
        for &s in self.dag.successors(g) {
            self.pending[s] -= 1;
            if self.pending[s] == 0 && self.dag.kind(s) != GateKind::Measure {
                self.ready.insert(s);
            }
        }
    }
}

/// Distances over the qubits program `p` owns plus the free ones, memoized
/// on that qubit set.
fn own_distances<'m>(
    memo: &'m mut HashMap<Vec<bool>, DistanceMatrix>,
    backend: &Backend,
    mapping: &GlobalMapping,
    p: usize,
) -> &'m DistanceMatrix {
    let mask: Vec<bool> = (0..mapping.n_physical())
        .map(|q| mapping.owner(q).map_or(true, |o| o == p))
        .collect();
    memo.entry(mask)
        .or_insert_with_key(|mask| shortest_paths(&backend.graph, Some(mask)))
}

/// Which programs the engine routes and over which qubits.
enum Scope {
    /// All programs together on the whole chip.
    Joint,
    /// One program confined to a qubit mask.
    Alone { program: usize, mask: Vec<bool> },
}

struct Engine<'a> {
    programs: &'a [QuantumProgram],
    backend: &'a Backend,
    scope: Scope,
    mapping: GlobalMapping,
    progress: Vec<Option<Progress>>,
    d: DistanceMatrix,
    own_d: HashMap<Vec<bool>, DistanceMatrix>,
    events: Vec<Event>,
    stats: Vec<RouteStats>,
}

impl<'a> Engine<'a> {
    fn new(
        programs: &'a [QuantumProgram],
        backend: &'a Backend,
        initial: GlobalMapping,
        scope: Scope,
    ) -> Self {
        let (d, progress) = match &scope {
            Scope::Joint => (
                shortest_paths(&backend.graph, None),
                programs.iter().map(|p| Some(Progress::new(p))).collect(),
            ),
            Scope::Alone { program, mask } => (
                shortest_paths(&backend.graph, Some(mask)),
                programs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i == *program).then(|| Progress::new(p)))
                    .collect(),
            ),
        };
        Self {
            programs,
            backend,
            scope,
            mapping: initial,
            progress,
            d,
            own_d: HashMap::new(),
            events: Vec::new(),
            stats: vec![RouteStats::default(); programs.len()],
        }
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.progress.len()).filter(|&p| self.progress[p].is_some())
    }

    fn operands(&self, p: usize, g: usize) -> [usize; 2] {
        let q = &self.programs[p].gates[g].qubits;
        [self.mapping.phys(p, q[0]), self.mapping.phys(p, q[1])]
    }

    /// Executes compliant gates until none is left; returns how many ran.
    fn execute_ready(&mut self) -> usize {
        let mut ran = 0;
        loop {
            let mut progressed = false;
            for p in 0..self.progress.len() {
                let Some(prog) = &self.progress[p] else {
                    continue;
                };
                let ready: Vec<usize> = prog.ready.iter().copied().collect();
                for g in ready {
                    let gate = &self.programs[p].gates[g];
                    let qubits: Vec<usize> = gate
                        .qubits
                        .iter()
                        .map(|&l| self.mapping.phys(p, l))
                        .collect();
                    if gate.is_cnot() && !self.backend.graph.is_edge(qubits[0], qubits[1]) {
                        continue;
                    }
                    self.events.push(Event::Gate {
                        program: p,
                        gate: g,
                        qubits,
                    });
                    if let Some(prog) = &mut self.progress[p] {
                        prog.finish(g);
                    }
                    progressed = true;
                    ran += 1;
                }
            }
            if !progressed {
                return ran;
            }
        }
    }

    fn done(&self) -> bool {
        self.progress.iter().flatten().all(|p| p.left == 0)
    }

    fn blocked(&self, p: usize) -> Vec<usize> {
        self.progress[p]
            .as_ref()
            .map_or_else(Vec::new, |prog| prog.ready.iter().copied().collect())
    }

    fn apply(&mut self, a: usize, b: usize, program: usize) {
        let class = self.mapping.class_of(a, b);
        self.stats[program].record(class);
        self.events.push(Event::Swap(SwapOp {
            a,
            b,
            class,
            program,
        }));
        self.mapping.apply_swap(a, b);
    }

    /// One heuristic swap over the current front layers.
    fn step(&mut self) -> Result<(), RoutingError> {
        let n = self.mapping.n_physical() as f64;
        let mut to_resolve = Vec::new();
        let mut fronts: Vec<Vec<FrontGate>> = Vec::new();
        let programs: Vec<usize> = self.active().collect();
        for p in programs {
            let blocked = self.blocked(p);
            if blocked.is_empty() {
                continue;
            }
            let critical: Vec<usize> = match &self.progress[p] {
                Some(prog) => blocked
                    .iter()
                    .copied()
                    .filter(|&g| prog.dag.has_layer_successor(g))
                    .collect(),
                None => Vec::new(),
            };
            let chosen = if critical.is_empty() {
                &blocked
            } else {
                &critical
            };
            for &g in chosen {
                let ops = self.operands(p, g);
                if self.d.get(ops[0], ops[1]).is_none() {
                    return Err(RoutingError::Unroutable {
                        program: p,
                        gate: g,
                    });
                }
                to_resolve.push((p, ops));
            }
            let mut front = Vec::new();
            for g in blocked {
                let [p1, p2] = self.operands(p, g);
                let gain_value = match self.scope {
                    Scope::Alone { .. } => 0.0,
                    Scope::Joint => {
                        let own = own_distances(&mut self.own_d, self.backend, &self.mapping, p);
                        gain(p1, p2, &self.d, own).map_or(n, f64::from)
                    }
                };
                front.push(FrontGate {
                    p1,
                    p2,
                    gain: gain_value,
                });
            }
            fronts.push(front);
        }
        let mut candidates = obtain_swaps(&to_resolve, self.backend, &self.mapping);
        if let Scope::Alone { mask, .. } = &self.scope {
            candidates.retain(|s| mask[s.a] && mask[s.b]);
        }
        let mut best: Option<(f64, SwapOp)> = None;
        for c in candidates {
            let s = score((c.a, c.b), &fronts, &self.d);
            if best.map_or(true, |(bs, _)| s < bs - SCORE_EPS) {
                best = Some((s, c));
            }
        }
        if let Some((_, c)) = best {
            self.apply(c.a, c.b, c.program);
        }
        Ok(())
    }

    /// Walks one operand of the oldest blocked gate next to the other.
    fn walk_oldest(&mut self) -> Result<(), RoutingError> {
        let oldest = self
            .active()
            .filter_map(|p| self.blocked(p).first().map(|&g| (g, p)))
            .min();
        let Some((g, p)) = oldest else { return Ok(()) };
        let [from, to] = self.operands(p, g);
        let mask = match &self.scope {
            Scope::Alone { mask, .. } => Some(mask.as_slice()),
            Scope::Joint => None,
        };
        let path =
            shortest_path(&self.backend.graph, mask, from, to).ok_or(RoutingError::Unroutable {
                program: p,
                gate: g,
            })?;
        for w in path.windows(2).take(path.len().saturating_sub(2)) {
            self.apply(w[0], w[1], p);
        }
        Ok(())
    }

    fn run(mut self) -> Result<Schedule, RoutingError> {
        let initial = self.mapping.clone();
        let limit = 3 * self.mapping.n_physical();
        let mut idle = 0;
        self.execute_ready();
        while !self.done() {
            if idle >= limit {
                self.walk_oldest()?;
                idle = 0;
            } else {
                self.step()?;
            }
            if self.execute_ready() > 0 {
                idle = 0;
            } else {
                idle += 1;
            }
        }
        // Measures are pinned to the end, on the final positions.
        for p in self.active().collect::<Vec<_>>() {
            for g in self.programs[p]
                .gates
                .iter()
                .filter(|g| g.kind == GateKind::Measure)
            {
                let qubits = vec![self.mapping.phys(p, g.qubits[0])];
                self.events.push(Event::Gate {
                    program: p,
                    gate: g.id,
                    qubits,
                });
            }
        }
        Ok(Schedule {
            events: self.events,
            initial,
            final_mapping: self.mapping,
            stats: self.stats,
            failed: Vec::new(),
        })
    }
}

fn check_initial(programs: &[QuantumProgram], initial: &GlobalMapping) -> Result<(), RoutingError> {
    if initial.sigma.len() != programs.len() {
        return Err(RoutingError::InvalidMapping(format!(
            "{} layouts for {} programs",
            initial.sigma.len(),
            programs.len()
        )));
    }
    for (p, (s, prog)) in initial.sigma.iter().zip(programs).enumerate() {
        if s.len() != prog.n_qubits {
            return Err(RoutingError::InvalidMapping(format!(
                "program {p} has {} qubits but a layout of {}",
                prog.n_qubits,
                s.len()
            )));
        }
    }
    Ok(())
}

/// Routes all programs jointly. Candidate swaps may cross program
/// boundaries or pull in free qubits when that shortens a front gate.
pub fn xswap_route(
    programs: &[QuantumProgram],
    initial: &GlobalMapping,
    backend: &Backend,
) -> Result<Schedule, RoutingError> {
    check_initial(programs, initial)?;
    Engine::new(programs, backend, initial.clone(), Scope::Joint).run()
}

/// Routes each program on its own initial qubits only and merges the
/// per-program schedules round-robin. Programs whose region cannot connect
/// a CNOT are reported in `failed`.
pub fn baseline_route(
    programs: &[QuantumProgram],
    initial: &GlobalMapping,
    backend: &Backend,
) -> Result<Schedule, RoutingError> {
    check_initial(programs, initial)?;
    let n = backend.n_qubits();
    let mut lists = Vec::new();
    let mut stats = vec![RouteStats::default(); programs.len()];
    let mut failed = Vec::new();
    for p in 0..programs.len() {
        let mut mask = vec![false; n];
        for &q in &initial.sigma[p] {
            mask[q] = true;
        }
        let scope = Scope::Alone { program: p, mask };
        match Engine::new(programs, backend, initial.clone(), scope).run() {
            Ok(s) => {
                stats[p] = s.stats[p].clone();
                lists.push(s.events);
            }
            Err(RoutingError::Unroutable { .. }) => {
                failed.push(p);
                lists.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    let mut events = Vec::new();
    let mut iters: Vec<_> = lists.into_iter().map(|l| l.into_iter()).collect();
    loop {
        let mut any = false;
        for it in &mut iters {
            if let Some(e) = it.next() {
                events.push(e);
                any = true;
            }
        }
        if !any {
            break;
        }
    }
    let mut final_mapping = initial.clone();
    for e in &events {
        if let Event::Swap(s) = e {
            final_mapping.apply_swap(s.a, s.b);
        }
    }
    Ok(Schedule {
        events,
        initial: initial.clone(),
        final_mapping,
        stats,
        failed,
    })
}

//! End-to-end compilation under a partition/routing policy, and the bench
//! grid built on top of it.

mod bench;
mod input;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{ParseError, QuantumProgram};
use crate::hardware::{Backend, BackendError};
use crate::partition::{
    build_hierarchy_tree, frp_partition, partition_qubits, Partition, PartitionError,
};
use crate::routing::{
    baseline_route, decompose, noise_traces, verify_equivalence, xswap_route, Compiled,
    Equivalence, GlobalMapping, RouteStats, RoutingError, Schedule,
};
use crate::scheduler::epst;
use crate::sim::{self, noisy_success_probability, PstMode};

pub use bench::{render_table, run_bench, BenchCell, BenchConfig, BenchReport, PolicyDelta};
pub use input::{
    load_backend, load_instance, load_program, parse_manifest, random_program, read_manifest,
    Instance,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Backend { path: PathBuf, source: BackendError },
    #[error("{path}: {msg}")]
    Document { path: PathBuf, msg: String },
    #[error("no programs to compile")]
    NoPrograms,
    #[error("partition failed: {}", .0.join("; "))]
    Unplaced(Vec<String>),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// FRP partition, each program routed inside its own region.
    Baseline,
    CdapOnly,
    XswapOnly,
    CdapXswap,
    /// Every program alone on the whole chip.
    Independent,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Baseline,
        Policy::CdapOnly,
        Policy::XswapOnly,
        Policy::CdapXswap,
        Policy::Independent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Baseline => "baseline",
            Policy::CdapOnly => "cdap-only",
            Policy::XswapOnly => "xswap-only",
            Policy::CdapXswap => "cdap-xswap",
            Policy::Independent => "independent",
        }
    }

    fn uses_cdap(self) -> bool {
        matches!(self, Policy::CdapOnly | Policy::CdapXswap | Policy::Independent)
    }

    fn router(self) -> Router {
        match self {
            Policy::Baseline | Policy::CdapOnly => Router::Baseline,
            _ => Router::Xswap,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s || (s == "cdap+xswap" && *p == Policy::CdapXswap))
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Router {
    Baseline,
    Xswap,
}

impl Router {
    pub fn route(
        self,
        programs: &[QuantumProgram],
        initial: &GlobalMapping,
        backend: &Backend,
    ) -> Result<Schedule, RoutingError> {
        match self {
            Router::Baseline => baseline_route(programs, initial, backend),
            Router::Xswap => xswap_route(programs, initial, backend),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub omega: f64,
    /// Largest simulated register for the equivalence check.
    pub verify_cap: usize,
    /// Noisy success probability per program, when set.
    pub pst: Option<PstMode>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            omega: crate::partition::DEFAULT_OMEGA,
            verify_cap: sim::DEFAULT_CAP,
            pst: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramReport {
    pub name: String,
    pub n_qubits: usize,
    /// Physical qubits of the initial layout, sorted.
    pub region: Vec<usize>,
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    pub swaps: RouteStats,
    pub original_cnots: usize,
    pub original_gates: usize,
    pub cnots: usize,
    pub gates: usize,
    pub depth: usize,
    pub epst: Option<f64>,
    pub pst: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    /// Policy name, or the router name for a pinned-layout compile.
    pub policy: String,
    pub backend: String,
    pub omega: f64,
    pub programs: Vec<ProgramReport>,
    pub total_swaps: usize,
    pub total_cnots: usize,
    pub total_gates: usize,
    pub depth: usize,
    pub compile_seconds: f64,
    /// `None` when the check was skipped; `equivalence_note` says why.
    pub equivalence: Option<Equivalence>,
    pub equivalence_note: Option<String>,
}

impl CompileReport {
    pub fn failed_programs(&self) -> Vec<&str> {
        self.programs
            .iter()
            .filter(|p| p.failed)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn equivalence_failed(&self) -> bool {
        self.equivalence.is_some_and(|e| !e.passed)
    }
}

/// One routed unit: the programs compiled together on one chip.
#[derive(Debug, Clone)]
pub struct Unit {
    pub programs: Vec<usize>,
    pub schedule: Schedule,
    pub compiled: Compiled,
}

#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub report: CompileReport,
    /// A single unit except under the independent policy.
    pub units: Vec<Unit>,
}

fn place(
    programs: &[QuantumProgram],
    backend: &Backend,
    cdap: bool,
    omega: f64,
) -> Result<Partition, PipelineError> {
    let part = if cdap {
        let tree = build_hierarchy_tree(backend, omega)?;
        partition_qubits(&tree, programs, backend)?
    } else {
        frp_partition(programs, backend)?
    };
    if !part.unassigned.is_empty() {
        let free = backend.n_qubits() - part.assignments.iter().map(|a| a.region.len()).sum::<usize>();
        let diagnostics = part
            .unassigned
            .iter()
            .map(|&p| {
                format!(
                    "`{}` needs {} qubits, no region left ({free} qubits unallocated)",
                    programs[p].name, programs[p].n_qubits
                )
            })
            .collect();
        return Err(PipelineError::Unplaced(diagnostics));
    }
    Ok(part)
}

fn layout_of(part: &Partition, n_programs: usize, n_physical: usize) -> Result<GlobalMapping, PipelineError> {
    let sigma = (0..n_programs)
        .map(|p| {
            part.assignment(p)
                .map(|a| a.mapping.sigma.clone())
                .ok_or_else(|| PipelineError::Unplaced(vec![format!("program {p} has no assignment")]))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GlobalMapping::new(n_physical, sigma)?)
}

struct UnitResult {
    unit: Unit,
    reports: Vec<ProgramReport>,
    equivalence: Result<Equivalence, String>,
}

fn route_unit(
    programs: &[QuantumProgram],
    ids: Vec<usize>,
    layout: &GlobalMapping,
    backend: &Backend,
    router: Router,
    opts: &CompileOptions,
) -> Result<UnitResult, PipelineError> {
    let schedule = router.route(programs, layout, backend)?;
    let compiled = decompose(programs, &schedule, backend)?;
    let equivalence = match verify_equivalence(programs, &compiled, &schedule, opts.verify_cap) {
        Ok(e) => Ok(e),
        Err(RoutingError::Sim(e)) => Err(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let traces = opts.pst.map(|_| noise_traces(programs, &schedule, backend));
    let mut reports = Vec::new();
    for (p, program) in programs.iter().enumerate() {
        let failed = schedule.failed.contains(&p);
        let mut region = layout.sigma[p].clone();
        region.sort_unstable();
        let stats = &compiled.stats[p];
        let pst = match (opts.pst, &traces) {
            (Some(mode), Some(traces)) if !failed => {
                noisy_success_probability(program, &traces[p], mode).ok()
            }
            _ => None,
        };
        reports.push(ProgramReport {
            name: program.name.clone(),
            n_qubits: program.n_qubits,
            epst: epst(program, &region, backend).ok(),
            region,
            initial_layout: layout.sigma[p].clone(),
            final_layout: schedule.final_mapping.sigma[p].clone(),
            swaps: schedule.stats[p].clone(),
            original_cnots: stats.original_cnots,
            original_gates: stats.original_gates,
            cnots: stats.cnots,
            gates: stats.gates,
            depth: stats.depth,
            pst,
            failed,
        });
    }
    Ok(UnitResult {
        unit: Unit {
            programs: ids,
            schedule,
            compiled,
        },
        reports,
        equivalence,
    })
}

fn assemble(
    policy: String,
    backend: &Backend,
    omega: f64,
    started: Instant,
    results: Vec<UnitResult>,
) -> CompileOutput {
    let mut programs: Vec<Option<ProgramReport>> = Vec::new();
    let mut units = Vec::new();
    let mut equivalence: Option<Equivalence> = None;
    let mut note = None;
    for r in results {
        for (&p, rep) in r.unit.programs.iter().zip(r.reports) {
            if programs.len() <= p {
                programs.resize(p + 1, None);
            }
            programs[p] = Some(rep);
        }
        match r.equivalence {
            Ok(e) if note.is_none() => {
                equivalence = Some(match equivalence {
                    None => e,
                    Some(prev) => Equivalence {
                        passed: prev.passed && e.passed,
                        deviation: prev.deviation.max(e.deviation),
                        simulated_qubits: prev.simulated_qubits.max(e.simulated_qubits),
                    },
                });
            }
            Ok(_) => {}
            Err(msg) => {
                equivalence = None;
                note = Some(format!("skipped: {msg}"));
            }
        }
        units.push(r.unit);
    }
    let programs: Vec<ProgramReport> = programs.into_iter().flatten().collect();
    let report = CompileReport {
        policy,
        backend: backend.name.clone(),
        omega,
        total_swaps: programs.iter().map(|p| p.swaps.swaps).sum(),
        total_cnots: programs.iter().map(|p| p.cnots).sum(),
        total_gates: programs.iter().map(|p| p.gates).sum(),
        depth: units.iter().map(|u| u.compiled.depth).max().unwrap_or(0),
        compile_seconds: started.elapsed().as_secs_f64(),
        equivalence,
        equivalence_note: note,
        programs,
    };
    CompileOutput { report, units }
}

/// Partitions and routes `programs` on `backend` under `policy`, then
/// verifies the result by simulation when it fits under the cap.
pub fn compile(
    programs: &[QuantumProgram],
    backend: &Backend,
    policy: Policy,
    opts: &CompileOptions,
) -> Result<CompileOutput, PipelineError> {
    if programs.is_empty() {
        return Err(PipelineError::NoPrograms);
    }
    let started = Instant::now();
    let n = backend.n_qubits();
    let mut results = Vec::new();
    if policy == Policy::Independent {
        for (p, program) in programs.iter().enumerate() {
            let one = std::slice::from_ref(program);
            let part = place(one, backend, true, opts.omega)?;
            let layout = layout_of(&part, 1, n)?;
            results.push(route_unit(one, vec![p], &layout, backend, Router::Xswap, opts)?);
        }
    } else {
        let part = place(programs, backend, policy.uses_cdap(), opts.omega)?;
        let layout = layout_of(&part, programs.len(), n)?;
        let ids = (0..programs.len()).collect();
        results.push(route_unit(programs, ids, &layout, backend, policy.router(), opts)?);
    }
    Ok(assemble(policy.name().into(), backend, opts.omega, started, results))
}

/// Routes `programs` from a fixed initial layout, skipping partitioning.
pub fn compile_with_layout(
    programs: &[QuantumProgram],
    backend: &Backend,
    layout: &GlobalMapping,
    router: Router,
    opts: &CompileOptions,
) -> Result<CompileOutput, PipelineError> {
    if programs.is_empty() {
        return Err(PipelineError::NoPrograms);
    }
    let started = Instant::now();
    let ids = (0..programs.len()).collect();
    let result = route_unit(programs, ids, layout, backend, router, opts)?;
    let name = match router {
        Router::Baseline => "baseline-route",
        Router::Xswap => "xswap-route",
    };
    Ok(assemble(name.into(), backend, opts.omega, started, vec![result]))
}

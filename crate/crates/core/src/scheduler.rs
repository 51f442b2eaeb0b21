//! Fidelity estimates and the batching loop that decides which queued
//! programs share the chip.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::QuantumProgram;
use crate::hardware::Backend;
use crate::partition::{partition_qubits, HierarchyTree, Partition, PartitionError};

pub const DEFAULT_EPSILON: f64 = 0.15;
pub const DEFAULT_LOOKAHEAD: usize = 8;
pub const DEFAULT_MAX_COLOCATE: usize = 2;

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("region of {available} qubits cannot host {needed}")]
    RegionTooSmall { needed: usize, available: usize },
    #[error("region has no internal coupling for a program with CNOTs")]
    NoIntraEdges,
    #[error("program `{0}` cannot be placed even alone")]
    Unassignable(String),
    #[error("no batches")]
    NoBatches,
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Estimated probability of a successful trial of `program` on `region`:
/// `f_2q^#cx · f_1q^#1q · f_ro^#qubits`, each `f` the mean fidelity of its
/// kind over the region.
pub fn epst(program: &QuantumProgram, region: &[usize], backend: &Backend) -> Result<f64, SchedulerError> {
    if region.len() < program.n_qubits {
        return Err(SchedulerError::RegionTooSmall {
            needed: program.n_qubits,
            available: region.len(),
        });
    }
    let calib = &backend.calib;
    let edges: Vec<f64> = backend
        .graph
        .edges()
        .iter()
        .filter(|(a, b)| region.contains(a) && region.contains(b))
        .map(|&(a, b)| calib.cnot_fidelity(a, b))
        .collect();
    let f2 = if edges.is_empty() {
        if program.n_cnot > 0 {
            return Err(SchedulerError::NoIntraEdges);
        }
        1.0
    } else {
        edges.iter().sum::<f64>() / edges.len() as f64
    };
    let mean = |f: &dyn Fn(usize) -> f64| region.iter().map(|&q| f(q)).sum::<f64>() / region.len() as f64;
    let f1 = mean(&|q| calib.oneq_fidelity(q));
    let fro = mean(&|q| calib.readout_fidelity(q));
    Ok(f2.powi(program.n_cnot as i32) * f1.powi(program.n_1q as i32) * fro.powi(program.n_qubits as i32))
}

/// EPST of `program` on the region it gets when alone on the chip.
pub fn independent_epst(program: &QuantumProgram, tree: &HierarchyTree, backend: &Backend) -> Result<f64, SchedulerError> {
    let part = partition_qubits(tree, std::slice::from_ref(program), backend)?;
    let a = part
        .assignments
        .first()
        .ok_or_else(|| SchedulerError::Unassignable(program.name.clone()))?;
    epst(program, &a.region, backend)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    /// Co-located with at least one other job.
    Batched,
    /// Runs alone.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: usize,
    pub program: QuantumProgram,
    pub ind_epst: Option<f64>,
    pub co_epst: Option<f64>,
    pub status: JobStatus,
}

impl Job {
    pub fn new(id: usize, program: QuantumProgram) -> Self {
        Self {
            id,
            program,
            ind_epst: None,
            co_epst: None,
            status: JobStatus::Queued,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub job: usize,
    pub ind_epst: f64,
    pub co_epst: f64,
    /// `1 − co/ind`.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    /// Job ids in admission order.
    pub jobs: Vec<usize>,
    /// `None` when the single member could not be placed at all.
    pub partition: Option<Partition>,
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub epsilon: f64,
    /// How many queue positions (head included) a batch may draw from.
    pub lookahead: usize,
    pub max_colocate: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            lookahead: DEFAULT_LOOKAHEAD,
            max_colocate: DEFAULT_MAX_COLOCATE,
        }
    }
}

/// A violation is admissible below ε, and always when co-location costs
/// nothing (so ε = 0 still pairs jobs whose regions are equally good).
fn admissible(violation: f64, epsilon: f64) -> bool {
    violation < epsilon || violation <= 0.0
}

/// Joint partition of `members` with each member's EPST decision, or `None`
/// if the set is not admissible.
fn try_batch(
    jobs: &[Job],
    members: &[usize],
    tree: &HierarchyTree,
    backend: &Backend,
    epsilon: f64,
) -> Result<Option<(Partition, Vec<Decision>)>, SchedulerError> {
    let programs: Vec<QuantumProgram> = members.iter().map(|&j| jobs[j].program.clone()).collect();
    let part = partition_qubits(tree, &programs, backend)?;
    if !part.unassigned.is_empty() {
        return Ok(None);
    }
    let mut decisions = Vec::new();
    for (k, &j) in members.iter().enumerate() {
        let Some(ind) = jobs[j].ind_epst else {
            return Ok(None);
        };
        let Some(a) = part.assignment(k) else {
            return Ok(None);
        };
        let Ok(co) = epst(&jobs[j].program, &a.region, backend) else {
            return Ok(None);
        };
        let violation = 1.0 - co / ind;
        if !admissible(violation, epsilon) {
            return Ok(None);
        }
        decisions.push(Decision {
            job: jobs[j].id,
            ind_epst: ind,
            co_epst: co,
            violation,
        });
    }
    Ok(Some((part, decisions)))
}

/// Greedy head-of-queue batching. Each batch starts with the queue head and
/// scans the next `lookahead − 1` jobs, admitting a job only if every member
/// (newcomer included) keeps its EPST violation admissible under the joint
/// partition. Jobs are updated in place with their EPSTs and status.
pub fn schedule_tasks(
    jobs: &mut [Job],
    tree: &HierarchyTree,
    backend: &Backend,
    config: &SchedulerConfig,
) -> Result<Vec<Batch>, SchedulerError> {
    for job in jobs.iter_mut() {
        if job.ind_epst.is_none() {
            job.ind_epst = independent_epst(&job.program, tree, backend).ok();
        }
    }
    let mut queue: Vec<usize> = (0..jobs.len()).collect();
    let mut batches = Vec::new();
    while !queue.is_empty() {
        let mut members = vec![queue[0]];
        let mut accepted = try_batch(jobs, &members, tree, backend, f64::INFINITY)?;
        let scan = config.lookahead.min(queue.len());
        for &candidate in &queue[1..scan] {
            if members.len() >= config.max_colocate || accepted.is_none() {
                break;
            }
            let mut tentative = members.clone();
            tentative.push(candidate);
            if let Some(found) = try_batch(jobs, &tentative, tree, backend, config.epsilon)? {
                members = tentative;
                accepted = Some(found);
            }
        }
        queue.retain(|j| !members.contains(j));
        let status = if members.len() > 1 {
            JobStatus::Batched
        } else {
            JobStatus::Independent
        };
        let (partition, decisions) = match accepted {
            Some((p, d)) => (Some(p), d),
            None => (None, Vec::new()),
        };
        for d in &decisions {
            if let Some(job) = jobs.iter_mut().find(|j| j.id == d.job) {
                job.co_epst = Some(d.co_epst);
            }
        }
        for &m in &members {
            jobs[m].status = status;
        }
        batches.push(Batch {
            jobs: members.iter().map(|&m| jobs[m].id).collect(),
            partition,
            decisions,
        });
    }
    Ok(batches)
}

/// Trial reduction factor: jobs per batch.
pub fn trf(batches: &[Batch]) -> Result<f64, SchedulerError> {
    if batches.is_empty() {
        return Err(SchedulerError::NoBatches);
    }
    let jobs: usize = batches.iter().map(|b| b.jobs.len()).sum();
    Ok(jobs as f64 / batches.len() as f64)
}

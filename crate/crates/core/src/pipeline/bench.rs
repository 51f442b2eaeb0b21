//! Workload × policy × seed grids over [`compile`].

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{compile, CompileOptions, Policy};
use crate::circuit::QuantumProgram;
use crate::hardware::{random_backend, Backend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub policies: Vec<Policy>,
    /// Each seed redraws the calibration; empty means the backend as given.
    pub seeds: Vec<u64>,
    pub options: CompileOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub workload: String,
    pub policy: Policy,
    pub seed: Option<u64>,
    pub swaps: Option<usize>,
    pub cnots: Option<usize>,
    pub gates: Option<usize>,
    pub depth: Option<usize>,
    pub mean_epst: Option<f64>,
    pub mean_pst: Option<f64>,
    pub equivalent: Option<bool>,
    pub error: Option<String>,
}

/// Mean differences of `policy` against `reference` over the cells where
/// both succeeded on the same workload and seed. Positive reductions mean
/// `policy` is cheaper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDelta {
    pub policy: Policy,
    pub reference: Policy,
    pub pairs: usize,
    pub mean_swap_delta: f64,
    pub mean_gate_delta: f64,
    pub mean_gate_reduction_pct: f64,
    pub mean_epst_gain_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend: String,
    pub cells: Vec<BenchCell>,
    pub deltas: Vec<PolicyDelta>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn run_cell(
    name: &str,
    programs: &[QuantumProgram],
    backend: &Backend,
    policy: Policy,
    seed: Option<u64>,
    options: &CompileOptions,
) -> BenchCell {
    let mut cell = BenchCell {
        workload: name.to_string(),
        policy,
        seed,
        swaps: None,
        cnots: None,
        gates: None,
        depth: None,
        mean_epst: None,
        mean_pst: None,
        equivalent: None,
        error: None,
    };
    match compile(programs, backend, policy, options) {
        Ok(out) => {
            let r = out.report;
            let failed = r.failed_programs();
            if !failed.is_empty() {
                cell.error = Some(format!("routing failed for {}", failed.join(", ")));
            }
            cell.swaps = Some(r.total_swaps);
            cell.cnots = Some(r.total_cnots);
            cell.gates = Some(r.total_gates);
            cell.depth = Some(r.depth);
            cell.mean_epst = mean(r.programs.iter().filter_map(|p| p.epst));
            cell.mean_pst = mean(r.programs.iter().filter_map(|p| p.pst));
            cell.equivalent = r.equivalence.map(|e| e.passed);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn deltas(cells: &[BenchCell], policies: &[Policy]) -> Vec<PolicyDelta> {
    let Some(&reference) = policies.first() else {
        return Vec::new();
    };
    let ok = |c: &&BenchCell| c.error.is_none() && c.gates.is_some();
    let by_key: BTreeMap<(&str, Option<u64>), &BenchCell> = cells
        .iter()
        .filter(ok)
        .filter(|c| c.policy == reference)
        .map(|c| ((c.workload.as_str(), c.seed), c))
        .collect();
    policies[1..]
        .iter()
        .map(|&policy| {
            let pairs: Vec<(&BenchCell, &BenchCell)> = cells
                .iter()
                .filter(ok)
                .filter(|c| c.policy == policy)
                .filter_map(|c| by_key.get(&(c.workload.as_str(), c.seed)).map(|r| (*r, c)))
                .collect();
            let num = |v: Option<usize>| v.unwrap_or(0) as f64;
            PolicyDelta {
                policy,
                reference,
                pairs: pairs.len(),
                mean_swap_delta: mean(pairs.iter().map(|(r, c)| num(c.swaps) - num(r.swaps))).unwrap_or(0.0),
                mean_gate_delta: mean(pairs.iter().map(|(r, c)| num(c.gates) - num(r.gates))).unwrap_or(0.0),
                mean_gate_reduction_pct: mean(
                    pairs
                        .iter()
                        .filter(|(r, _)| num(r.gates) > 0.0)
                        .map(|(r, c)| 100.0 * (num(r.gates) - num(c.gates)) / num(r.gates)),
                )
                .unwrap_or(0.0),
                mean_epst_gain_pct: mean(pairs.iter().filter_map(|(r, c)| match (r.mean_epst, c.mean_epst) {
                    (Some(a), Some(b)) if a > 0.0 => Some(100.0 * (b - a) / a),
                    _ => None,
                })),
            }
        })
        .collect()
}

/// Compiles every workload under every policy and seed. Failed cells carry
/// their error and the grid continues.
pub fn run_bench(
    workloads: &[(String, Vec<QuantumProgram>)],
    backend: &Backend,
    config: &BenchConfig,
) -> BenchReport {
    let seeds: Vec<Option<u64>> = if config.seeds.is_empty() {
        vec![None]
    } else {
        config.seeds.iter().copied().map(Some).collect()
    };
    let mut cells = Vec::new();
    for seed in seeds {
        let chip = match seed {
            Some(s) => random_backend(&backend.graph, &backend.calib, s),
            None => Ok(backend.clone()),
        };
        for (name, programs) in workloads {
            for &policy in &config.policies {
                cells.push(match &chip {
                    Ok(chip) => run_cell(name, programs, chip, policy, seed, &config.options),
                    Err(e) => BenchCell {
                        workload: name.clone(),
                        policy,
                        seed,
                        swaps: None,
                        cnots: None,
                        gates: None,
                        depth: None,
                        mean_epst: None,
                        mean_pst: None,
                        equivalent: None,
                        error: Some(e.to_string()),
                    },
                });
            }
        }
    }
    BenchReport {
        backend: backend.name.clone(),
        deltas: deltas(&cells, &config.policies),
        cells,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Aligned plain-text rendering of a bench report.
pub fn render_table(report: &BenchReport) -> String {
    let header = [
        "workload", "policy", "seed", "swaps", "cnots", "gates", "depth", "epst", "pst", "equiv",
        "error",
    ];
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.workload.clone(),
                c.policy.to_string(),
                opt(c.seed),
                opt(c.swaps),
                opt(c.cnots),
                opt(c.gates),
                opt(c.depth),
                fixed(c.mean_epst),
                fixed(c.mean_pst),
                c.equivalent.map_or("-", |e| if e { "ok" } else { "FAIL" }).to_string(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.iter().map(|h| h.to_string()).collect());
    for row in rows {
        line(row);
    }
    if !report.deltas.is_empty() {
        out.push('\n');
        for d in &report.deltas {
            let _ = writeln!(
                out,
                "{} vs {} over {} cells: swaps {:+.2}, gates {:+.2} ({:.1}% fewer gates), epst {}",
                d.policy,
                d.reference,
                d.pairs,
                d.mean_swap_delta,
                d.mean_gate_delta,
                d.mean_gate_reduction_pct,
                d.mean_epst_gain_pct
                    .map_or_else(|| "-".to_string(), |g| format!("{g:+.1}%")),
            );
        }
    }
    out
}

//! `qmulti`: partition, route, batch and simulate multi-programmed workloads.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qmulti::circuit::QuantumProgram;
use qmulti::hardware::{Backend, BackendError};
use qmulti::partition::{average_redundancy, build_hierarchy_tree, DEFAULT_OMEGA};
use qmulti::pipeline::{
    compile, compile_with_layout, load_backend, load_instance, load_program, read_manifest,
    render_table, run_bench, BenchConfig, CompileOptions, CompileOutput, CompileReport,
    PipelineError, Policy, Router,
};
use qmulti::scheduler::{schedule_tasks, trf, Batch, Job, SchedulerConfig, DEFAULT_EPSILON};
use qmulti::sim::{bitstring, output_distribution, PstMode, DEFAULT_CAP};

#[derive(Debug, Parser)]
#[command(name = "qmulti", version, about = "Multi-programming qubit mapping")]
struct Cli {
    /// Backend document (coupling graph plus calibration).
    #[arg(long, global = true)]
    backend: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_OMEGA)]
    omega: f64,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Doc)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Pretty JSON.
    Doc,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PstArg {
    Exact,
    Sampled,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition and route programs together.
    Compile {
        programs: Vec<PathBuf>,
        #[arg(long, default_value = "cdap-xswap", value_parser = parse_policy)]
        policy: Policy,
        /// Instance document pinning backend, programs and initial layout.
        #[arg(long, conflicts_with = "programs")]
        instance: Option<PathBuf>,
        /// Router for `--instance` runs.
        #[arg(long, value_enum, default_value_t = RouterArg::Xswap)]
        router: RouterArg,
        /// Largest register simulated for the equivalence check.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// Also estimate each program's success probability under noise.
        #[arg(long, value_enum)]
        pst: Option<PstArg>,
        #[arg(long, default_value_t = 8024)]
        shots: usize,
    },
    /// Compile a grid of workloads × policies × calibration seeds.
    Bench {
        /// One workload per line: whitespace-separated program files.
        manifest: PathBuf,
        /// Comma-separated; the first is the reference for deltas.
        #[arg(long, default_value = "baseline,cdap-xswap", value_parser = parse_policies)]
        policies: Policies,
        /// Calibration seeds; each redraws the backend's rates.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Batch a queue of programs for co-location.
    Schedule {
        /// Program files in queue order, one per line.
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = qmulti::scheduler::DEFAULT_LOOKAHEAD)]
        lookahead: usize,
        #[arg(long, default_value_t = qmulti::scheduler::DEFAULT_MAX_COLOCATE)]
        max_colocate: usize,
    },
    /// Build the backend's hierarchy tree.
    Tree,
    /// Exact output distribution of a program.
    Simulate {
        program: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RouterArg {
    Xswap,
    Baseline,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

#[derive(Debug, Clone)]
struct Policies(Vec<Policy>);

/// An empty string is an empty list.
fn parse_policies(s: &str) -> Result<Policies, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map(Policies)
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Self {
            code,
            msg: msg.into(),
        }
    }
}

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_PARTITION: u8 = 4;
const EXIT_EQUIVALENCE: u8 = 5;

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Io { .. } => EXIT_IO,
            PipelineError::Backend {
                source: BackendError::Io(_),
                ..
            } => EXIT_IO,
            PipelineError::Parse { .. }
            | PipelineError::Backend { .. }
            | PipelineError::Document { .. } => EXIT_PARSE,
            PipelineError::NoPrograms => EXIT_USAGE,
            PipelineError::Unplaced(_) | PipelineError::Partition(_) | PipelineError::Routing(_) => {
                EXIT_PARTITION
            }
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

struct Output {
    dir: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let Some(dir) = &self.dir else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_failure(&path, e))
    }

    /// Prints `doc` (or its text rendering) and saves the document as
    /// `<stem>.json` under the output directory.
    fn emit<T: Serialize>(&self, stem: &str, doc: &T, text: impl FnOnce() -> String) -> Result<(), Failure> {
        let json = serde_json::to_string_pretty(doc).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        self.write(&format!("{stem}.json"), &format!("{json}\n"))?;
        match self.format {
            Format::Doc => println!("{json}"),
            Format::Text => print!("{}", text()),
        }
        Ok(())
    }
}

fn backend_arg(cli: &Cli) -> Result<Backend, Failure> {
    let path = cli
        .backend
        .as_ref()
        .ok_or_else(|| Failure::new(EXIT_USAGE, "--backend is required for this command"))?;
    Ok(load_backend(path)?)
}

fn load_programs(paths: &[PathBuf]) -> Result<Vec<QuantumProgram>, Failure> {
    paths
        .iter()
        .map(|p| load_program(p).map_err(Failure::from))
        .collect()
}

fn compile_text(r: &CompileReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy {} on {} (omega {})", r.policy, r.backend, r.omega);
    for p in &r.programs {
        let _ = writeln!(
            out,
            "  {:<16} region {:?} layout {:?} swaps {} (intra {}, inter {}, free {}) gates {} -> {} epst {}{}",
            p.name,
            p.region,
            p.initial_layout,
            p.swaps.swaps,
            p.swaps.intra,
            p.swaps.inter,
            p.swaps.free_involving,
            p.original_gates,
            p.gates,
            p.epst.map_or_else(|| "-".to_string(), |e| format!("{e:.4}")),
            p.pst.map_or_else(String::new, |e| format!(" pst {e:.4}")),
        );
        if p.failed {
            let _ = writeln!(out, "    routing failed inside its region");
        }
    }
    let _ = writeln!(
        out,
        "total swaps {} gates {} cnots {} depth {} time {:.3}s",
        r.total_swaps, r.total_gates, r.total_cnots, r.depth, r.compile_seconds
    );
    match (&r.equivalence, &r.equivalence_note) {
        (Some(e), _) => {
            let verdict = if e.passed { "passed" } else { "FAILED" };
            let _ = writeln!(out, "equivalence {verdict} (deviation {:.3e}, {} qubits)", e.deviation, e.simulated_qubits);
        }
        (None, Some(note)) => {
            let _ = writeln!(out, "equivalence {note}");
        }
        (None, None) => {}
    }
    out
}

fn write_artifacts(out: &Output, compiled: &CompileOutput) -> Result<(), Failure> {
    let single = compiled.units.len() == 1;
    for (i, unit) in compiled.units.iter().enumerate() {
        let suffix = if single { String::new() } else { format!("_{i}") };
        out.write(&format!("combined{suffix}.qasm"), &unit.compiled.combined.to_qasm())?;
        let schedule = serde_json::to_string_pretty(&unit.schedule)
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        out.write(&format!("schedule{suffix}.json"), &format!("{schedule}\n"))?;
        for program in &unit.compiled.per_program {
            if !program.gates.is_empty() {
                out.write(&format!("{}.compiled.qasm", program.name), &program.to_qasm())?;
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let out = Output {
        dir: cli.out.clone(),
        format: cli.format,
    };
    match &cli.command {
        Command::Compile {
            programs,
            policy,
            instance,
            router,
            cap,
            pst,
            shots,
        } => {
            let opts = CompileOptions {
                omega: cli.omega,
                verify_cap: *cap,
                pst: pst.map(|m| match m {
                    PstArg::Exact => PstMode::Exact,
                    PstArg::Sampled => PstMode::Sampled {
                        shots: *shots,
                        seed: cli.seed.unwrap_or(0),
                    },
                }),
            };
            let compiled = if let Some(path) = instance {
                let inst = load_instance(path)?;
                let router = match router {
                    RouterArg::Xswap => Router::Xswap,
                    RouterArg::Baseline => Router::Baseline,
                };
                compile_with_layout(&inst.programs, &inst.backend, &inst.layout, router, &opts)?
            } else {
                if programs.is_empty() {
                    return Err(Failure::new(EXIT_USAGE, "no program files given"));
                }
                let backend = backend_arg(cli)?;
                compile(&load_programs(programs)?, &backend, *policy, &opts)?
            };
            write_artifacts(&out, &compiled)?;
            let report = &compiled.report;
            out.emit("report", report, || compile_text(report))?;
            let failed = report.failed_programs();
            if !failed.is_empty() {
                return Err(Failure::new(
                    EXIT_PARTITION,
                    format!("routing failed for {}", failed.join(", ")),
                ));
            }
            if report.equivalence_failed() {
                return Err(Failure::new(EXIT_EQUIVALENCE, "compiled circuit is not equivalent"));
            }
            Ok(())
        }
        Command::Bench {
            manifest,
            policies,
            seeds,
            cap,
        } => {
            let backend = backend_arg(cli)?;
            let mut workloads = Vec::new();
            for files in read_manifest(manifest)? {
                let programs = load_programs(&files)?;
                let name = programs
                    .iter()
                    .map(|p| p.name.as_str())
                    .collect::<Vec<_>>()
                    .join("+");
                workloads.push((name, programs));
            }
            let seeds = if seeds.is_empty() {
                cli.seed.into_iter().collect()
            } else {
                seeds.clone()
            };
            let config = BenchConfig {
                policies: policies.0.clone(),
                seeds,
                options: CompileOptions {
                    omega: cli.omega,
                    verify_cap: *cap,
                    pst: None,
                },
            };
            let report = run_bench(&workloads, &backend, &config);
            let table = render_table(&report);
            out.write("bench.txt", &table)?;
            out.emit("bench", &report, || table.clone())
        }
        Command::Schedule {
            manifest,
            epsilon,
            lookahead,
            max_colocate,
        } => {
            if !(0.0..=1.0).contains(epsilon) || *lookahead == 0 || *max_colocate == 0 {
                return Err(Failure::new(
                    EXIT_USAGE,
                    "need epsilon in [0, 1], lookahead >= 1 and max-colocate >= 1",
                ));
            }
            let backend = backend_arg(cli)?;
            let files: Vec<PathBuf> = read_manifest(manifest)?.into_iter().flatten().collect();
            let mut jobs: Vec<Job> = load_programs(&files)?
                .into_iter()
                .enumerate()
                .map(|(i, p)| Job::new(i, p))
                .collect();
            let tree = build_hierarchy_tree(&backend, cli.omega).map_err(|e| Failure::new(EXIT_PARTITION, e.to_string()))?;
            let config = SchedulerConfig {
                epsilon: *epsilon,
                lookahead: *lookahead,
                max_colocate: *max_colocate,
            };
            let batches = schedule_tasks(&mut jobs, &tree, &backend, &config)
                .map_err(|e| Failure::new(EXIT_PARTITION, e.to_string()))?;
            let report = ScheduleReport {
                backend: backend.name.clone(),
                config,
                trf: trf(&batches).ok(),
                jobs: jobs
                    .iter()
                    .map(|j| JobSummary {
                        id: j.id,
                        name: j.program.name.clone(),
                        ind_epst: j.ind_epst,
                        co_epst: j.co_epst,
                        status: j.status,
                    })
                    .collect(),
                batches,
            };
            out.emit("schedule", &report, || schedule_text(&report))
        }
        Command::Tree => {
            let backend = backend_arg(cli)?;
            let tree = build_hierarchy_tree(&backend, cli.omega)
                .map_err(|e| Failure::new(EXIT_PARTITION, e.to_string()))?;
            out.write("tree.dot", &tree.to_dot())?;
            let report = TreeReport {
                backend: backend.name.clone(),
                omega: cli.omega,
                merge_order: tree.merge_order(),
                average_redundancy: average_redundancy(&tree).ok(),
                tree,
            };
            out.emit("tree", &report, || {
                let mut s = String::new();
                for (i, set) in report.merge_order.iter().enumerate() {
                    let _ = writeln!(s, "merge {}: {set:?}", i + 1);
                }
                if let Some(r) = report.average_redundancy {
                    let _ = writeln!(s, "average redundancy {r:.4}");
                }
                s
            })
        }
        Command::Simulate { program, cap } => {
            let p = load_program(program)?;
            let dist = output_distribution(&p, *cap).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
            let width = p.n_outcome_bits();
            let report = SimulateReport {
                program: p.name.clone(),
                n_qubits: p.n_qubits,
                bit_order: "most significant bit first; bit k is classical bit k",
                distribution: dist.iter().map(|(&o, &pr)| (bitstring(o, width), pr)).collect(),
            };
            out.emit("distribution", &report, || {
                report
                    .distribution
                    .iter()
                    .map(|(b, p)| format!("{b} {p:.12}\n"))
                    .collect()
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct JobSummary {
    id: usize,
    name: String,
    ind_epst: Option<f64>,
    co_epst: Option<f64>,
    status: qmulti::scheduler::JobStatus,
}

#[derive(Debug, Serialize)]
struct ScheduleReport {
    backend: String,
    config: SchedulerConfig,
    trf: Option<f64>,
    jobs: Vec<JobSummary>,
    batches: Vec<Batch>,
}

fn schedule_text(r: &ScheduleReport) -> String {
    let mut s = String::new();
    for (i, b) in r.batches.iter().enumerate() {
        let names: Vec<&str> = b.jobs.iter().map(|&j| r.jobs[j].name.as_str()).collect();
        let _ = write!(s, "batch {}: {}", i + 1, names.join(", "));
        for d in &b.decisions {
            let _ = write!(s, "  [{} violation {:.4}]", r.jobs[d.job].name, d.violation);
        }
        s.push('\n');
    }
    if let Some(t) = r.trf {
        let _ = writeln!(s, "trf {t:.4}");
    }
    s
}

#[derive(Debug, Serialize)]
struct TreeReport {
    backend: String,
    omega: f64,
    merge_order: Vec<Vec<usize>>,
    average_redundancy: Option<f64>,
    tree: qmulti::partition::HierarchyTree,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    program: String,
    n_qubits: usize,
    bit_order: &'static str,
    distribution: std::collections::BTreeMap<String, f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

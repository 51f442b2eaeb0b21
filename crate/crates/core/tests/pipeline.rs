use std::path::PathBuf;

use qmulti::circuit::QuantumProgram;
use qmulti::hardware::Backend;
use qmulti::pipeline::{
    compile, compile_with_layout, load_backend, load_instance, load_program, random_program,
    read_manifest, render_table, run_bench, BenchConfig, CompileOptions, CompileReport,
    PipelineError, Policy, Router,
};
use qmulti::sim::PstMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn bench(name: &str) -> QuantumProgram {
    load_program(fixture(&format!("benchmarks/{name}.qasm"))).unwrap()
}

fn chip(name: &str) -> Backend {
    load_backend(fixture(&format!("backends/{name}.backend"))).unwrap()
}

const BENCHMARKS: [&str; 10] = [
    "bv_n3",
    "bv_n4",
    "peres_3",
    "toffoli_3",
    "fredkin_3",
    "3_17_13",
    "4mod5-v1_22",
    "mod5mils_65",
    "alu-v0_27",
    "decod24-v2_43",
];

fn check_report(r: &CompileReport, programs: &[QuantumProgram]) {
    for (p, rep) in programs.iter().zip(&r.programs) {
        assert_eq!(rep.gates, p.n_gates() + 3 * rep.swaps.swaps, "{}", rep.name);
        assert_eq!(rep.cnots, p.n_cnot + 3 * rep.swaps.swaps, "{}", rep.name);
        assert_eq!(rep.region.len(), p.n_qubits);
    }
    assert_eq!(r.total_gates, r.programs.iter().map(|p| p.gates).sum::<usize>());
    let back: CompileReport = serde_json::from_str(&serde_json::to_string(r).unwrap()).unwrap();
    assert_eq!(&back, r);
}

#[test]
fn pinned_layout_matches_router_comparison() {
    let inst = load_instance(fixture("instances/inter_swap.toml")).unwrap();
    let opts = CompileOptions::default();
    let x = compile_with_layout(&inst.programs, &inst.backend, &inst.layout, Router::Xswap, &opts).unwrap();
    let b = compile_with_layout(&inst.programs, &inst.backend, &inst.layout, Router::Baseline, &opts).unwrap();
    assert_eq!((x.report.total_swaps, b.report.total_swaps), (1, 2));
    assert!(x.report.equivalence.unwrap().passed);
    assert!(b.report.equivalence.unwrap().passed);
    check_report(&x.report, &inst.programs);
}

#[test]
fn every_policy_compiles_benchmark_pairs_equivalently() {
    let melbourne = chip("melbourne");
    let tokyo = chip("tokyo20");
    let pairs = [
        ("bv_n3", "peres_3", &tokyo),
        ("toffoli_3", "bv_n3", &melbourne),
        ("4mod5-v1_22", "fredkin_3", &tokyo),
        ("alu-v0_27", "3_17_13", &tokyo),
    ];
    for (a, b, backend) in pairs {
        let programs = vec![bench(a), bench(b)];
        for policy in Policy::ALL {
            let out = compile(&programs, backend, policy, &CompileOptions::default())
                .unwrap_or_else(|e| panic!("{a}+{b} {policy}: {e}"));
            let eq = out.report.equivalence.unwrap_or_else(|| {
                panic!("{a}+{b} {policy}: {:?}", out.report.equivalence_note)
            });
            assert!(eq.passed, "{a}+{b} {policy}: deviation {}", eq.deviation);
            assert!(out.report.failed_programs().is_empty());
            check_report(&out.report, &programs);
        }
    }
}

#[test]
fn every_benchmark_alone_compiles_under_every_policy() {
    let tokyo = chip("tokyo20");
    for name in BENCHMARKS {
        let p = vec![bench(name)];
        for policy in Policy::ALL {
            let out = compile(&p, &tokyo, policy, &CompileOptions::default()).unwrap();
            assert!(out.report.equivalence.unwrap().passed, "{name} {policy}");
            check_report(&out.report, &p);
        }
    }
}

/// With no free qubits left over, gains vanish and both routers see the
/// same candidates, so the schedules coincide.
#[test]
fn lone_program_filling_the_chip_routes_identically() {
    let london = chip("london");
    for name in ["4mod5-v1_22", "mod5mils_65", "alu-v0_27"] {
        let p = vec![bench(name)];
        let opts = CompileOptions::default();
        let base = compile(&p, &london, Policy::CdapOnly, &opts).unwrap();
        let x = compile(&p, &london, Policy::CdapXswap, &opts).unwrap();
        assert_eq!(base.report.total_swaps, x.report.total_swaps, "{name}");
        assert_eq!(base.units[0].schedule, x.units[0].schedule, "{name}");
    }
}

#[test]
fn oversubscribed_chip_is_a_partition_error() {
    let london = chip("london");
    let programs = vec![bench("bv_n4"), bench("peres_3")];
    for policy in [Policy::Baseline, Policy::CdapXswap] {
        match compile(&programs, &london, policy, &CompileOptions::default()) {
            Err(PipelineError::Unplaced(msgs)) => assert_eq!(msgs.len(), 1, "{msgs:?}"),
            other => panic!("{policy}: {other:?}"),
        }
    }
    assert!(matches!(
        compile(&[], &london, Policy::Baseline, &CompileOptions::default()),
        Err(PipelineError::NoPrograms)
    ));
}

#[test]
fn pst_is_reported_and_bounded_by_one() {
    let programs = vec![bench("bv_n3"), bench("peres_3")];
    let opts = CompileOptions {
        pst: Some(PstMode::Exact),
        ..CompileOptions::default()
    };
    let out = compile(&programs, &chip("tokyo20"), Policy::CdapXswap, &opts).unwrap();
    for p in &out.report.programs {
        let pst = p.pst.unwrap();
        assert!(pst > 0.0 && pst < 1.0, "{}: {pst}", p.name);
    }
}

#[test]
fn bench_grid_is_deterministic() {
    let tokyo = chip("tokyo20");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let workloads: Vec<(String, Vec<QuantumProgram>)> = (0..3)
        .map(|i| {
            let progs = vec![random_program("a", &mut rng), random_program("b", &mut rng)];
            (format!("w{i}"), progs)
        })
        .collect();
    let config = BenchConfig {
        policies: vec![Policy::Baseline, Policy::CdapXswap],
        seeds: vec![1, 2],
        options: CompileOptions::default(),
    };
    let a = run_bench(&workloads, &tokyo, &config);
    let b = run_bench(&workloads, &tokyo, &config);
    assert_eq!(a.cells.len(), 12);
    assert_eq!(render_table(&a), render_table(&b));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.deltas.len(), 1);
    assert_eq!(a.deltas[0].pairs, 6);

    let empty = run_bench(&workloads, &tokyo, &BenchConfig { policies: vec![], ..config });
    assert!(empty.cells.is_empty() && empty.deltas.is_empty());
}

#[test]
fn bench_continues_past_failed_cells() {
    let london = chip("london");
    let workloads = vec![
        ("too-big".to_string(), vec![bench("bv_n4"), bench("peres_3")]),
        ("fits".to_string(), vec![bench("bv_n3")]),
    ];
    let config = BenchConfig {
        policies: vec![Policy::Baseline],
        seeds: vec![],
        options: CompileOptions::default(),
    };
    let r = run_bench(&workloads, &london, &config);
    assert!(r.cells[0].error.is_some());
    assert!(r.cells[1].error.is_none());
    assert!(render_table(&r).contains("too-big"));
}

#[test]
fn manifests_resolve_relative_to_their_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.txt"), "# pairs\nbv_n3.qasm peres_3.qasm\n").unwrap();
    let m = read_manifest(dir.path().join("m.txt")).unwrap();
    assert_eq!(m, vec![vec![dir.path().join("bv_n3.qasm"), dir.path().join("peres_3.qasm")]]);
    assert!(matches!(read_manifest(dir.path().join("missing")), Err(PipelineError::Io { .. })));
}

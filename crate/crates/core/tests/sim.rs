use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use proptest::prelude::*;
use qmulti::circuit::{Gate, GateKind, QuantumProgram};
use qmulti::pipeline::load_program;
use qmulti::sim::{gate_matrix, output_distribution, simulate, StateVector, DEFAULT_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn benchmark(name: &str) -> QuantumProgram {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/benchmarks")
        .join(format!("{name}.qasm"));
    load_program(path).unwrap()
}

const KINDS: [GateKind; 12] = [
    GateKind::H,
    GateKind::X,
    GateKind::Y,
    GateKind::Z,
    GateKind::S,
    GateKind::Sdg,
    GateKind::T,
    GateKind::Tdg,
    GateKind::Rx,
    GateKind::Ry,
    GateKind::Rz,
    GateKind::U3,
];

fn random_gate(n: usize, rng: &mut ChaCha8Rng) -> Gate {
    let (kind, qubits) = if n > 1 && rng.gen_bool(0.4) {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        (GateKind::Cx, vec![a, b])
    } else {
        (KINDS[rng.gen_range(0..KINDS.len())], vec![rng.gen_range(0..n)])
    };
    let params = (0..kind.n_params())
        .map(|_| rng.gen_range(-3.2..3.2))
        .collect();
    Gate {
        kind,
        qubits,
        params,
        clbit: None,
        id: 0,
    }
}

fn random_circuit(n: usize, len: usize, seed: u64) -> QuantumProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = (0..len).map(|_| random_gate(n, &mut rng)).collect();
    QuantumProgram::new("r", n, 0, gates)
}

type Dense = Vec<Vec<Complex64>>;

fn identity(dim: usize) -> Dense {
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| Complex64::new(f64::from(u8::from(r == c)), 0.0))
                .collect()
        })
        .collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| (0..n).map(|k| a[r][k] * b[k][c]).sum())
                .collect()
        })
        .collect()
}

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n * m]; n * m];
    for r in 0..n * m {
        for c in 0..n * m {
            out[r][c] = a[r / m][c / m] * b[r % m][c % m];
        }
    }
    out
}

/// Full-register unitary of a gate built by Kronecker products (qubit 0 is
/// the rightmost factor, so it is the least significant index bit).
fn full_unitary(g: &Gate, n: usize) -> Dense {
    if g.kind == GateKind::Cx {
        let dim = 1 << n;
        let (c, t) = (g.qubits[0], g.qubits[1]);
        let mut u = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
        for i in 0..dim {
            let j = if i >> c & 1 == 1 { i ^ (1 << t) } else { i };
            u[j][i] = Complex64::new(1.0, 0.0);
        }
        return u;
    }
    let m = gate_matrix(g.kind, &g.params).unwrap();
    let local: Dense = m.iter().map(|r| r.to_vec()).collect();
    let mut u = identity(1);
    for q in (0..n).rev() {
        u = kron(&u, &if q == g.qubits[0] { local.clone() } else { identity(2) });
    }
    u
}

#[test]
fn norm_is_preserved_over_many_gates() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut sv = StateVector::new(6).unwrap();
    for _ in 0..10_000 {
        sv.apply_gate(&random_gate(6, &mut rng)).unwrap();
    }
    assert!((sv.norm_sqr() - 1.0).abs() <= 1e-12, "{}", sv.norm_sqr());
}

#[test]
fn cnot_flips_target_when_control_is_set() {
    let mut sv = StateVector::new(2).unwrap();
    sv.apply(GateKind::X, &[1], &[]).unwrap();
    sv.apply(GateKind::Cx, &[1, 0], &[]).unwrap();
    assert!((sv.amplitudes()[3].re - 1.0).abs() < 1e-12);
    assert!(sv.apply(GateKind::Cx, &[0, 2], &[]).is_err());
}

#[test]
fn benchmark_outcomes_are_point_masses() {
    let bv = output_distribution(&benchmark("bv_n3"), DEFAULT_CAP).unwrap();
    assert_eq!(bv.len(), 1);
    assert!((bv[&0b11] - 1.0).abs() < 1e-12);
    let bv4 = output_distribution(&benchmark("bv_n4"), DEFAULT_CAP).unwrap();
    assert!((bv4[&0b111] - 1.0).abs() < 1e-12);
    for name in [
        "peres_3",
        "toffoli_3",
        "fredkin_3",
        "3_17_13",
        "4mod5-v1_22",
        "mod5mils_65",
        "alu-v0_27",
        "decod24-v2_43",
    ] {
        let d = output_distribution(&benchmark(name), DEFAULT_CAP).unwrap();
        let top = d.values().copied().fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-9, "{name}: {d:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_matrix_chain(n in 1usize..=3, len in 0usize..12, seed in any::<u64>()) {
        let p = random_circuit(n, len, seed);
        let mut u = identity(1 << n);
        for g in &p.gates {
            u = matmul(&full_unitary(g, n), &u);
        }
        let sv = simulate(&p, DEFAULT_CAP).unwrap();
        for (i, a) in sv.amplitudes().iter().enumerate() {
            prop_assert!((a - u[i][0]).norm() < 1e-10, "amplitude {i}: {a} vs {}", u[i][0]);
        }
    }

    #[test]
    fn relabeling_permutes_outcomes(len in 0usize..20, seed in any::<u64>(), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = 4;
        let p = random_circuit(n, len, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let mut relabeled = p.clone();
        for g in &mut relabeled.gates {
            for q in &mut g.qubits {
                *q = perm[*q];
            }
        }
        let a = output_distribution(&p, DEFAULT_CAP).unwrap();
        let b = output_distribution(&relabeled, DEFAULT_CAP).unwrap();
        // Outcome bit perm[q] of the relabeled run is bit q of the original.
        let mut mapped: BTreeMap<u64, f64> = BTreeMap::new();
        for (&o, &pr) in &b {
            let back = (0..n).fold(0u64, |acc, q| acc | ((o >> perm[q]) & 1) << q);
            *mapped.entry(back).or_insert(0.0) += pr;
        }
        let keys: std::collections::BTreeSet<u64> = a.keys().chain(mapped.keys()).copied().collect();
        for k in keys {
            let (x, y) = (a.get(&k).copied().unwrap_or(0.0), mapped.get(&k).copied().unwrap_or(0.0));
            prop_assert!((x - y).abs() < 1e-10, "outcome {k}: {x} vs {y}");
        }
    }
}

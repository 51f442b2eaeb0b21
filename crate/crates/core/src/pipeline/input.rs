//! Loading programs, instances and manifests, and drawing random programs.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::circuit::{parse_program, Gate, GateKind, QuantumProgram};
use crate::hardware::{read_backend, Backend};
use crate::routing::GlobalMapping;

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a QASM file; the program is named after the file stem.
pub fn load_program(path: impl AsRef<Path>) -> Result<QuantumProgram, PipelineError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map_or_else(|| "program".to_string(), |s| s.to_string_lossy().into_owned());
    parse_program(&name, &read(path)?).map_err(|source| PipelineError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_backend(path: impl AsRef<Path>) -> Result<Backend, PipelineError> {
    let path = path.as_ref();
    read_backend(path).map_err(|source| PipelineError::Backend {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceProgram {
    file: PathBuf,
    layout: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceDocument {
    backend: PathBuf,
    #[serde(rename = "program")]
    programs: Vec<InstanceProgram>,
}

/// Programs pinned to a chip with a fixed initial layout. Paths inside the
/// document are relative to the document.
#[derive(Debug, Clone)]
pub struct Instance {
    pub backend: Backend,
    pub programs: Vec<QuantumProgram>,
    pub layout: GlobalMapping,
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, PipelineError> {
    let path = path.as_ref();
    let doc: InstanceDocument =
        toml::from_str(&read(path)?).map_err(|e| PipelineError::Document {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let backend = load_backend(dir.join(&doc.backend))?;
    let programs = doc
        .programs
        .iter()
        .map(|p| load_program(dir.join(&p.file)))
        .collect::<Result<Vec<_>, _>>()?;
    let sigma = doc.programs.iter().map(|p| p.layout.clone()).collect();
    let layout = GlobalMapping::new(backend.n_qubits(), sigma).map_err(|e| PipelineError::Document {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(Instance {
        backend,
        programs,
        layout,
    })
}

/// One workload per non-empty line: whitespace-separated program paths,
/// relative to the manifest. `#` starts a comment.
pub fn parse_manifest(text: &str, base: &Path) -> Vec<Vec<PathBuf>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|f| base.join(f)).collect())
        .collect()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<Vec<PathBuf>>, PipelineError> {
    let path = path.as_ref();
    Ok(parse_manifest(&read(path)?, path.parent().unwrap_or(Path::new("."))))
}

const ONE_QUBIT: [GateKind; 4] = [GateKind::H, GateKind::X, GateKind::T, GateKind::S];

/// A random program of 3 to 5 qubits and 5 to 25 CNOTs, with a one-qubit
/// gate before roughly a third of the CNOTs and a final measure of every
/// qubit.
pub fn random_program(name: impl Into<String>, rng: &mut impl Rng) -> QuantumProgram {
    let n = rng.gen_range(3..=5);
    let n_cx = rng.gen_range(5..=25);
    let qubits: Vec<usize> = (0..n).collect();
    let gate = |kind, qubits: Vec<usize>, clbit| Gate {
        kind,
        qubits,
        params: Vec::new(),
        clbit,
        id: 0,
    };
    let mut gates = Vec::new();
    for _ in 0..n_cx {
        if rng.gen_bool(1.0 / 3.0) {
            let kind = *ONE_QUBIT.choose(rng).unwrap_or(&GateKind::X);
            gates.push(gate(kind, vec![rng.gen_range(0..n)], None));
        }
        let pair: Vec<usize> = qubits.choose_multiple(rng, 2).copied().collect();
        gates.push(gate(GateKind::Cx, pair, None));
    }
    for q in 0..n {
        gates.push(gate(GateKind::Measure, vec![q], Some(q)));
    }
    QuantumProgram::new(name, n, n, gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn manifest_lines() {
        let m = parse_manifest("a.qasm b.qasm # pair\n\n# skip\nc.qasm\n", Path::new("/x"));
        assert_eq!(
            m,
            vec![
                vec![PathBuf::from("/x/a.qasm"), PathBuf::from("/x/b.qasm")],
                vec![PathBuf::from("/x/c.qasm")]
            ]
        );
    }

    #[test]
    fn random_programs_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let p = random_program(format!("r{i}"), &mut rng);
            assert!((3..=5).contains(&p.n_qubits));
            assert!((5..=25).contains(&p.n_cnot));
            assert!(p.gates.iter().filter(|g| g.is_cnot()).all(|g| g.qubits[0] != g.qubits[1]));
        }
    }
}

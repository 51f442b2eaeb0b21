use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Backend, BackendError, Calibration, CouplingGraph};

fn range<'a>(
    what: &'static str,
    values: impl Iterator<Item = &'a f64>,
) -> Result<(f64, f64), BackendError> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if lo > hi {
        return Err(BackendError::DegenerateRange(what));
    }
    Ok((lo, hi))
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Synthesizes a calibration for `topology`: every rate is drawn uniformly
/// from the `[min, max]` range of its category (CNOT, readout, one-qubit) in
/// `base`. Deterministic for a fixed seed.
pub fn random_backend(
    topology: &CouplingGraph,
    base: &Calibration,
    seed: u64,
) -> Result<Backend, BackendError> {
    let cnot = range("cnot_error", base.cnot_error.values())?;
    let readout = range("readout_error", base.readout_error.iter())?;
    let oneq = range("oneq_error", base.oneq_error.iter())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cnot_error = topology
        .edges()
        .iter()
        .map(|&e| (e, draw(&mut rng, cnot)))
        .collect();
    let readout_error = (0..topology.n_qubits())
        .map(|_| draw(&mut rng, readout))
        .collect();
    let oneq_error = (0..topology.n_qubits())
        .map(|_| draw(&mut rng, oneq))
        .collect();
    let calib = Calibration {
        cnot_error,
        readout_error,
        oneq_error,
        timestamp: format!("random-{seed}"),
    };
    Backend::new(format!("random-{seed}"), topology.clone(), calib)
}

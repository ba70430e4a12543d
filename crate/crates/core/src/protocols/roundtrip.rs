//! Tomography self-test on random two-qubit pure states.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::RunConfig;
use crate::error::Result;
use crate::qlin::{c, fidelity_pure, DensityMatrix, PureState};
use crate::rng::{stream, tag};
use crate::tomography::{mle_reconstruct, simulate_counts, MeasurementSetting};

use super::{Estimate, ProtocolResult, Table};

/// Haar-random pure state from complex Gaussian amplitudes.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, qubits: usize) -> PureState {
    let amps = (0..1usize << qubits)
        .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::new(amps).expect("nonzero with probability one")
}

/// Simulates counts for random states, reconstructs them by maximum
/// likelihood and reports the fidelity distribution.
pub fn run_tomo_roundtrip(cfg: &RunConfig) -> Result<ProtocolResult> {
    let n_states = cfg.tomography.roundtrip_states;
    let shots = cfg.tomography.roundtrip_shots;
    let settings = MeasurementSetting::all(2);
    let opts = cfg.tomography.mle;
    let runs: Vec<Result<(f64, bool, usize)>> = crate::par::map_indices(n_states, |i| {
        let mut rng = stream(cfg.seed, &[tag("tomo-roundtrip"), i as u64]);
        let psi = random_pure_state(&mut rng, 2);
        let rho = DensityMatrix::from_pure(&psi);
        let records = simulate_counts(&rho, &settings, shots, &mut rng, None)?;
        let report = mle_reconstruct(&records, &opts)?;
        Ok((
            fidelity_pure(&report.rho, &psi)?,
            report.monotone,
            report.iterations,
        ))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut res = ProtocolResult::new("tomo-roundtrip", cfg);
    res.trials = shots;
    let mut fids: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mut table = Table::new(&["state", "fidelity", "iterations"]);
    for (i, r) in runs.iter().enumerate() {
        table.rows.push(vec![i as f64, r.0, r.2 as f64]);
    }
    fids.sort_by(f64::total_cmp);
    if !fids.is_empty() {
        let mid = fids.len() / 2;
        let median = if fids.len() % 2 == 1 {
            fids[mid]
        } else {
            0.5 * (fids[mid - 1] + fids[mid])
        };
        res.set("median_fidelity", Estimate::exact(median));
        res.set("min_fidelity", Estimate::exact(fids[0]));
    }
    res.flags
        .insert("all_monotone".into(), runs.iter().all(|r| r.1));
    res.tables.insert("roundtrip".into(), table);
    Ok(res)
}

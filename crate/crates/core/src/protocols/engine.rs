//! Shared machinery of the gate protocols.
//!
//! A [`GateModel`] holds the calibrated imperfections for one pulse train.
//! A [`Scenario`] describes the input atom, the photons reflected in turn
//! and an optional atomic rotation before readout. Both modes produce
//! outcome statistics over the same measurement settings: the analytic
//! mode composes channels over a Gauss–Hermite quadrature of the detuning,
//! the Monte-Carlo mode samples individual trials.

use rand::Rng;

use crate::cavity::{calibrated_branch, khz_to_angular, CavityParams, GateBranch};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pulse::{
    extra_photon_channel, multi_photon_fraction, sample_detuning, CoherentPulse, Confusion,
};
use crate::qlin::{c, embed, CMatrix, CVector, PureState, Tensor, UnitaryOp};
use crate::rng::{chunks, stream};
use crate::tomography::{Basis, CountsRecord, MeasurementSetting};

/// Quadrature order for the detuning average.
pub const QUADRATURE_NODES: usize = 40;

/// Calibrated physics of one pulse train.
#[derive(Debug, Clone)]
pub struct GateModel {
    pub cavity: CavityParams,
    pub loss_coupled: f64,
    pub loss_uncoupled: f64,
    pub mode_overlap: f64,
    pub prep_fidelity: f64,
    pub jitter_khz: f64,
    pub offset_khz: f64,
    /// `P(n ≥ 2 | n ≥ 1)` of the pulse.
    pub multi_photon: f64,
    pub pulse_fwhm_us: Option<f64>,
    pub photon_confusion: Confusion,
    pub atom_confusion: Confusion,
    /// Extra symmetric error whenever the atom is rotated before readout.
    pub rotation_error: f64,
    pub preselection_pass: f64,
}

impl GateModel {
    pub fn new(cfg: &RunConfig, pulse: &CoherentPulse) -> Self {
        let imp = &cfg.imperfections;
        Self {
            cavity: cfg.cavity.params(&cfg.mirrors),
            loss_coupled: imp.loss_coupled,
            loss_uncoupled: imp.loss_uncoupled,
            mode_overlap: imp.mode_overlap,
            prep_fidelity: imp.prep_fidelity,
            jitter_khz: imp.freq_jitter_khz,
            offset_khz: pulse.carrier_offset_khz,
            multi_photon: multi_photon_fraction(pulse.mean_photons),
            pulse_fwhm_us: imp.spectral_averaging.then_some(pulse.fwhm_us),
            photon_confusion: Confusion::symmetric(imp.photonic_meas_error),
            atom_confusion: cfg.detection.confusion(),
            rotation_error: imp.rotation_error(),
            preselection_pass: cfg.preselection_pass,
        }
    }

    /// Reflection amplitudes for a carrier detuning `delta` (rad/µs)
    /// from the cavity.
    pub fn branch(&self, delta: f64) -> Result<GateBranch> {
        let p = self
            .cavity
            .with_detuning(self.cavity.delta_c + delta, self.cavity.delta_a);
        calibrated_branch(
            &p,
            self.loss_coupled,
            self.loss_uncoupled,
            self.pulse_fwhm_us,
        )
    }

    /// Detuning quadrature nodes (rad/µs) with weights.
    pub fn detuning_nodes(&self) -> Vec<(f64, f64)> {
        let offset = khz_to_angular(self.offset_khz);
        if self.jitter_khz <= 0.0 {
            return vec![(offset, 1.0)];
        }
        let sigma = khz_to_angular(self.jitter_khz);
        crate::cavity::gauss_hermite(QUADRATURE_NODES)
            .into_iter()
            .map(|(x, w)| (offset + sigma * x, w))
            .collect()
    }

    pub fn sample_delta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_detuning(rng, self.offset_khz, self.jitter_khz)
    }

    /// Readout confusion of the atom, worse when a rotation precedes it.
    pub fn atom_readout(&self, rotated: bool) -> Confusion {
        if rotated {
            self.atom_confusion.then_symmetric(self.rotation_error)
        } else {
            self.atom_confusion
        }
    }
}

/// Input and processing of one protocol run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub atom: PureState,
    pub photons: Vec<PureState>,
    /// Applied to the atom after the last reflection.
    pub atom_rotation: Option<UnitaryOp>,
}

impl Scenario {
    pub fn qubits(&self) -> usize {
        1 + self.photons.len()
    }

    fn initial(&self) -> Result<PureState> {
        let mut s = self.atom.clone();
        for p in &self.photons {
            s = s.tensor(p)?;
        }
        Ok(s)
    }

    fn photon_initial(&self) -> Result<PureState> {
        crate::qlin::tensor_all(&self.photons)
    }

    /// Whether the atomic readout in `setting` involves a rotation pulse.
    pub fn atom_rotated(&self, setting: &MeasurementSetting) -> bool {
        self.atom_rotation.is_some() || setting.bases()[0] != Basis::Z
    }
}

/// Diagonal of the gate acting on photon `k` (qubit `k + 1`).
fn gate_diagonal(branch: &GateBranch, qubits: usize, photon: usize) -> Vec<crate::qlin::C64> {
    let amps = branch.amplitudes();
    (0..1usize << qubits)
        .map(|i| {
            let atom = (i >> (qubits - 1)) & 1;
            let p = (i >> (qubits - 2 - photon)) & 1;
            amps[2 * atom + p]
        })
        .collect()
}

/// Unnormalized post-selected state: the qubit part and the part where
/// preparation left the atom outside the qubit (photons only).
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub good: CMatrix,
    pub leak: CMatrix,
}

impl Ensemble {
    /// Total post-selection weight.
    pub fn weight(&self) -> f64 {
        self.good.trace().re + self.leak.trace().re
    }

    /// Normalized state of the qubit part alone.
    pub fn qubit_state(&self) -> Option<crate::qlin::DensityMatrix> {
        crate::qlin::DensityMatrix::from_unnormalized(&self.good)
    }
}

/// Exact post-selected ensemble averaged over detuning.
pub fn analytic_ensemble(model: &GateModel, sc: &Scenario) -> Result<Ensemble> {
    let n = sc.qubits();
    let dim = 1usize << n;
    let psi = sc.initial()?;
    let phi = sc.photon_initial()?;
    let rho0 = psi.projector().into_matrix() * c(model.prep_fidelity, 0.0);
    let leak0 = phi.projector().into_matrix() * c(1.0 - model.prep_fidelity, 0.0);
    let eta = model.mode_overlap;
    let q = model.multi_photon;
    let mut good = CMatrix::zeros(dim, dim);
    let mut leak = CMatrix::zeros(dim / 2, dim / 2);
    for (delta, w) in model.detuning_nodes() {
        let branch = model.branch(delta)?;
        let mut rho = rho0.clone();
        let mut lk = leak0.clone();
        let extra = if q > 0.0 {
            Some(extra_photon_channel(&branch, eta, &PureState::down_x())?.on_qubit(0, n)?)
        } else {
            None
        };
        for (k, _) in sc.photons.iter().enumerate() {
            let d = CVector::from_vec(gate_diagonal(&branch, n, k));
            let k_op = CMatrix::from_diagonal(&d);
            rho = (&k_op * &rho * k_op.adjoint()) * c(eta, 0.0) + &rho * c(1.0 - eta, 0.0);
            if let Some(e) = &extra {
                rho = &rho * c(1.0 - q, 0.0) + e.apply_raw(&rho) * c(q, 0.0);
            }
            lk *= c(eta * branch.uncoupled().norm_sqr() + 1.0 - eta, 0.0);
        }
        if let Some(u) = &sc.atom_rotation {
            let full = embed(u.matrix(), 0, n);
            rho = &full * &rho * full.adjoint();
        }
        good += rho * c(w, 0.0);
        leak += lk * c(w, 0.0);
    }
    if good.trace().re + leak.trace().re <= 1e-300 {
        return Err(Error::Starvation(
            ": no photon survives post-selection".into(),
        ));
    }
    Ok(Ensemble { good, leak })
}

/// Outcome probabilities as read out, including leak and confusion.
pub fn readout_probabilities(
    model: &GateModel,
    sc: &Scenario,
    ens: &Ensemble,
    setting: &MeasurementSetting,
) -> Result<Vec<f64>> {
    let n = sc.qubits();
    if setting.qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: setting.qubits(),
        });
    }
    let photon_setting = MeasurementSetting::new(setting.bases()[1..].to_vec())?;
    let half = 1usize << (n - 1);
    let mut p: Vec<f64> = setting
        .outcome_vectors()
        .iter()
        .map(|v| v.dotc(&(&ens.good * v)).re.max(0.0))
        .collect();
    // a leaked atom reads as F=2, outcome 0 in every basis
    for (j, w) in photon_setting.outcome_vectors().iter().enumerate() {
        p[j] += w.dotc(&(&ens.leak * w)).re.max(0.0);
    }
    debug_assert_eq!(p.len(), 2 * half);
    let mut conf = vec![model.atom_readout(sc.atom_rotated(setting))];
    conf.extend(std::iter::repeat_n(model.photon_confusion, n - 1));
    let mut out = crate::pulse::confuse(&p, &conf);
    let total: f64 = out.iter().sum();
    if total <= 0.0 {
        return Err(Error::Starvation(format!(" in setting {setting}")));
    }
    for x in &mut out {
        *x /= total;
    }
    Ok(out)
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

/// Applies a diagonal operator and keeps the result with its Born weight.
/// Returns `false` when the sampled branch is the one that annihilates
/// the photon.
fn survive<R: Rng + ?Sized>(rng: &mut R, psi: &mut CVector, diag: &[crate::qlin::C64]) -> bool {
    for (a, d) in psi.iter_mut().zip(diag) {
        *a *= d;
    }
    let norm2 = psi.norm_squared();
    if rng.random::<f64>() >= norm2 || norm2 <= 0.0 {
        return false;
    }
    psi.unscale_mut(norm2.sqrt());
    true
}

/// Outcome of one simulated trial.
enum Trial {
    Rejected,
    Outcome(usize),
}

fn run_trial<R: Rng + ?Sized>(
    rng: &mut R,
    model: &GateModel,
    sc: &Scenario,
    setting: &MeasurementSetting,
    psi0: &CVector,
    phi0: &CVector,
) -> Result<Trial> {
    if rng.random::<f64>() >= model.preselection_pass {
        return Ok(Trial::Rejected);
    }
    let n = sc.qubits();
    let delta = model.sample_delta(rng);
    let branch = model.branch(delta)?;
    let leaked = rng.random::<f64>() >= model.prep_fidelity;
    let true_outcome = if leaked {
        let survive_p = branch.uncoupled().norm_sqr();
        for _ in &sc.photons {
            if rng.random::<f64>() < model.mode_overlap && rng.random::<f64>() >= survive_p {
                return Ok(Trial::Rejected);
            }
        }
        let photon_setting = MeasurementSetting::new(setting.bases()[1..].to_vec())?;
        let probs: Vec<f64> = photon_setting
            .outcome_vectors()
            .iter()
            .map(|w| w.dotc(phi0).norm_sqr())
            .collect();
        sample_index(rng, &probs)
    } else {
        let mut psi = psi0.clone();
        let mut extra: Option<Vec<CMatrix>> = None;
        for k in 0..sc.photons.len() {
            if rng.random::<f64>() < model.mode_overlap {
                let diag = gate_diagonal(&branch, n, k);
                if !survive(rng, &mut psi, &diag) {
                    return Ok(Trial::Rejected);
                }
            }
            if model.multi_photon > 0.0 && rng.random::<f64>() < model.multi_photon {
                if extra.is_none() {
                    let ch =
                        extra_photon_channel(&branch, model.mode_overlap, &PureState::down_x())?
                            .on_qubit(0, n)?;
                    extra = Some(ch.ops().to_vec());
                }
                let ops = extra.as_ref().expect("built above");
                let outs: Vec<CVector> = ops.iter().map(|k| k * &psi).collect();
                let weights: Vec<f64> = outs.iter().map(|v| v.norm_squared()).collect();
                let pick = sample_index(rng, &weights);
                let norm = weights[pick].sqrt();
                psi = outs[pick].unscale(norm);
            }
        }
        if let Some(u) = &sc.atom_rotation {
            psi = embed(u.matrix(), 0, n) * psi;
        }
        let probs: Vec<f64> = setting
            .outcome_vectors()
            .iter()
            .map(|v| v.dotc(&psi).norm_sqr())
            .collect();
        sample_index(rng, &probs)
    };
    let mut outcome = true_outcome;
    let atom_bit = 1usize << (n - 1);
    let atom_conf = model.atom_readout(sc.atom_rotated(setting));
    let a = usize::from(outcome & atom_bit != 0);
    if atom_conf.sample(rng, a) != a {
        outcome ^= atom_bit;
    }
    for q in 1..n {
        let bit = 1usize << (n - 1 - q);
        let b = usize::from(outcome & bit != 0);
        if model.photon_confusion.sample(rng, b) != b {
            outcome ^= bit;
        }
    }
    Ok(Trial::Outcome(outcome))
}

/// Counts from Monte-Carlo trials plus the number of attempts made.
#[derive(Debug, Clone)]
pub struct SampledSetting {
    pub record: CountsRecord,
    pub attempts: u64,
}

/// Runs `trials` attempted trials for `setting` on the stream family
/// `(seed, protocol, unit)`.
pub fn sample_setting(
    model: &GateModel,
    sc: &Scenario,
    setting: &MeasurementSetting,
    trials: u64,
    seed: u64,
    protocol: u64,
    unit: u64,
) -> Result<SampledSetting> {
    let psi0 = sc.initial()?.amplitudes().clone();
    let phi0 = sc.photon_initial()?.amplitudes().clone();
    let parts = chunks(trials);
    let per_chunk: Vec<Result<Vec<u64>>> = crate::par::map_indices(parts.len(), |i| {
        let (chunk, size) = parts[i];
        let mut rng = stream(seed, &[protocol, unit, chunk]);
        let mut counts = vec![0u64; setting.outcomes()];
        for _ in 0..size {
            if let Trial::Outcome(o) = run_trial(&mut rng, model, sc, setting, &psi0, &phi0)? {
                counts[o] += 1;
            }
        }
        Ok(counts)
    });
    let mut counts = vec![0u64; setting.outcomes()];
    for part in per_chunk {
        for (a, b) in counts.iter_mut().zip(part?) {
            *a += b;
        }
    }
    let record = CountsRecord::new(setting.clone(), counts)?;
    if record.total == 0 {
        return Err(Error::Starvation(format!(" in setting {setting}")));
    }
    Ok(SampledSetting {
        record,
        attempts: trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlin::{fidelity_pure, partial_trace, project_density, rotation, DensityMatrix};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn bell_scenario() -> Scenario {
        Scenario {
            atom: PureState::down_x(),
            photons: vec![PureState::down_x()],
            atom_rotation: None,
        }
    }

    fn ideal_model() -> GateModel {
        let cfg = RunConfig::ideal();
        GateModel::new(&cfg, &cfg.pulses.bell)
    }

    #[test]
    fn ideal_ensemble_is_bell_state() {
        let ens = analytic_ensemble(&ideal_model(), &bell_scenario()).unwrap();
        let rho = ens.qubit_state().unwrap();
        let u = PureState::up().tensor(&PureState::up_x()).unwrap();
        let v = PureState::down().tensor(&PureState::down_x()).unwrap();
        let bell = u.superpose(c(1.0, 0.0), &v, c(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&rho, &bell).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ens.leak.norm(), 0.0);
    }

    #[test]
    fn equal_losses_do_not_change_post_selected_state() {
        let mut m = ideal_model();
        m.loss_coupled = 0.3;
        m.loss_uncoupled = 0.3;
        let ens = analytic_ensemble(&m, &bell_scenario()).unwrap();
        assert_abs_diff_eq!(ens.weight(), 0.7, epsilon = 1e-12);
        let ideal = analytic_ensemble(&ideal_model(), &bell_scenario()).unwrap();
        let diff = ens
            .qubit_state()
            .unwrap()
            .max_abs_diff(&ideal.qubit_state().unwrap());
        assert!(diff < 1e-12);
    }

    #[test]
    fn eraser_outcomes_mix_to_photon_marginal() {
        let cfg = RunConfig::paper();
        let mut m = GateModel::new(&cfg, &cfg.pulses.eraser);
        m.prep_fidelity = 1.0;
        let sc = Scenario {
            atom: PureState::down_x(),
            photons: vec![PureState::down_x(), PureState::down_x()],
            atom_rotation: Some(rotation(PI / 2.0, -PI / 2.0)),
        };
        let rho = analytic_ensemble(&m, &sc).unwrap().qubit_state().unwrap();
        let marginal = partial_trace(&rho, &[1, 2]).unwrap();
        let mut mix = CMatrix::zeros(4, 4);
        for proj in [PureState::up(), PureState::down()] {
            let out = project_density(&rho, proj.projector().matrix(), 0).unwrap();
            let p = out.probability();
            let photons = partial_trace(out.state().unwrap(), &[1, 2]).unwrap();
            mix += photons.matrix() * c(p, 0.0);
        }
        let mix = DensityMatrix::from_matrix(mix).unwrap();
        assert!(mix.max_abs_diff(&marginal) < 1e-12);
    }

    #[test]
    fn readout_probabilities_are_normalized() {
        let cfg = RunConfig::paper();
        let m = GateModel::new(&cfg, &cfg.pulses.ghz);
        let sc = Scenario {
            atom: PureState::down_x(),
            photons: vec![PureState::down_x(), PureState::down_x()],
            atom_rotation: None,
        };
        let ens = analytic_ensemble(&m, &sc).unwrap();
        for s in MeasurementSetting::all(3) {
            let p = readout_probabilities(&m, &sc, &ens, &s).unwrap();
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        let cfg = RunConfig::paper();
        let m = GateModel::new(&cfg, &cfg.pulses.bell);
        let sc = bell_scenario();
        let ens = analytic_ensemble(&m, &sc).unwrap();
        let trials = 40_000;
        for (i, s) in MeasurementSetting::all(2).iter().enumerate() {
            let exact = readout_probabilities(&m, &sc, &ens, s).unwrap();
            let sampled = sample_setting(&m, &sc, s, trials, 5, 1, i as u64).unwrap();
            let n = sampled.record.total as f64;
            for (k, &p) in exact.iter().enumerate() {
                let f = sampled.record.counts[k] as f64 / n;
                let se = (p * (1.0 - p) / n).sqrt().max(1.0 / n);
                assert!(
                    (f - p).abs() < 5.0 * se,
                    "setting {s} outcome {k}: {f} vs {p}"
                );
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = RunConfig::paper();
        let m = GateModel::new(&cfg, &cfg.pulses.bell);
        let s: MeasurementSetting = "XX".parse().unwrap();
        let a = sample_setting(&m, &bell_scenario(), &s, 10_000, 3, 1, 0).unwrap();
        let b = sample_setting(&m, &bell_scenario(), &s, 10_000, 3, 1, 0).unwrap();
        assert_eq!(a.record, b.record);
    }

    #[test]
    fn total_loss_starves() {
        let mut m = ideal_model();
        m.loss_coupled = 1.0;
        m.loss_uncoupled = 1.0;
        let sc = bell_scenario();
        assert!(matches!(
            analytic_ensemble(&m, &sc),
            Err(Error::Starvation(_))
        ));
        let s: MeasurementSetting = "ZZ".parse().unwrap();
        assert!(matches!(
            sample_setting(&m, &sc, &s, 100, 1, 1, 0),
            Err(Error::Starvation(_))
        ));
    }
}

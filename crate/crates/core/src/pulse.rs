//! Faint coherent pulses, imperfection channels and detector models.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cavity::{khz_to_angular, GateBranch};
use crate::error::{check_probability, Error, Result};
use crate::qlin::{c, CMatrix, KrausChannel, PureState, C64};

/// Mean photon number above which a pulse is no longer "faint".
pub const FAINT_PULSE_LIMIT: f64 = 1.0;

/// Attenuated laser pulse with Gaussian temporal shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentPulse {
    pub mean_photons: f64,
    pub fwhm_us: f64,
    /// Mean carrier detuning from the cavity resonance.
    #[serde(default)]
    pub carrier_offset_khz: f64,
}

impl CoherentPulse {
    pub fn new(mean_photons: f64, fwhm_us: f64) -> Self {
        Self {
            mean_photons,
            fwhm_us,
            carrier_offset_khz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photons.is_finite() && self.mean_photons >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mean_photons".into(),
                reason: format!("{} must be >= 0", self.mean_photons),
            });
        }
        if !(self.fwhm_us.is_finite() && self.fwhm_us > 0.0) {
            return Err(Error::InvalidParameter {
                name: "fwhm_us".into(),
                reason: format!("{} must be > 0", self.fwhm_us),
            });
        }
        if !self.carrier_offset_khz.is_finite() {
            return Err(Error::InvalidParameter {
                name: "carrier_offset_khz".into(),
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        if self.mean_photons > FAINT_PULSE_LIMIT {
            vec![format!(
                "mean photon number {} exceeds the faint-pulse regime",
                self.mean_photons
            )]
        } else {
            Vec::new()
        }
    }
}

/// Poisson photon-number distribution with the tail folded into `n_max`.
pub fn photon_number_dist(p: &CoherentPulse, n_max: usize) -> Result<Vec<f64>> {
    if n_max < 2 {
        return Err(Error::InvalidParameter {
            name: "n_max".into(),
            reason: "must be at least 2".into(),
        });
    }
    p.validate()?;
    let nbar = p.mean_photons;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut term = (-nbar).exp();
    for k in 0..n_max {
        out.push(term);
        term *= nbar / (k + 1) as f64;
    }
    let head: f64 = out.iter().sum();
    out.push((1.0 - head).max(0.0));
    Ok(out)
}

/// `P(n ≥ 2 | n ≥ 1)` for a Poisson pulse; zero for an empty pulse.
pub fn multi_photon_fraction(mean_photons: f64) -> f64 {
    if mean_photons <= 0.0 {
        return 0.0;
    }
    let p0 = (-mean_photons).exp();
    let p1 = mean_photons * p0;
    // 1 − p0 − p1 loses precision for tiny n̄
    let tail = -(-mean_photons).exp_m1() - p1;
    let nonzero = -(-mean_photons).exp_m1();
    (tail / nonzero).clamp(0.0, 1.0)
}

/// Calibrated imperfection budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionConfig {
    pub mode_overlap: f64,
    pub prep_fidelity: f64,
    pub freq_jitter_khz: f64,
    pub photonic_meas_error: f64,
    pub loss_coupled: f64,
    pub loss_uncoupled: f64,
    pub rotation_readout_fidelity: f64,
    /// Average the reflection over the pulse spectrum.
    #[serde(default)]
    pub spectral_averaging: bool,
}

impl Default for ImperfectionConfig {
    fn default() -> Self {
        Self {
            mode_overlap: 0.92,
            prep_fidelity: 0.96,
            freq_jitter_khz: 300.0,
            photonic_meas_error: 0.01,
            loss_coupled: 0.34,
            loss_uncoupled: 0.30,
            rotation_readout_fidelity: 0.95,
            spectral_averaging: false,
        }
    }
}

impl ImperfectionConfig {
    /// Everything perfect, including loss.
    pub fn ideal() -> Self {
        Self {
            mode_overlap: 1.0,
            prep_fidelity: 1.0,
            freq_jitter_khz: 0.0,
            photonic_meas_error: 0.0,
            loss_coupled: 0.0,
            loss_uncoupled: 0.0,
            rotation_readout_fidelity: 1.0,
            spectral_averaging: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("mode_overlap", self.mode_overlap)?;
        check_probability("prep_fidelity", self.prep_fidelity)?;
        check_probability("photonic_meas_error", self.photonic_meas_error)?;
        check_probability("loss_coupled", self.loss_coupled)?;
        check_probability("loss_uncoupled", self.loss_uncoupled)?;
        check_probability("rotation_readout_fidelity", self.rotation_readout_fidelity)?;
        if !(self.freq_jitter_khz.is_finite() && self.freq_jitter_khz >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "freq_jitter_khz".into(),
                reason: format!("{} must be >= 0", self.freq_jitter_khz),
            });
        }
        Ok(())
    }

    /// Extra symmetric readout error of a rotated atomic measurement.
    ///
    /// The measured rotation-plus-readout success includes preparation, so
    /// the residual attributable to the rotation is `1 − f_rot / f_prep`.
    pub fn rotation_error(&self) -> f64 {
        if self.prep_fidelity <= 0.0 {
            return 0.0;
        }
        (1.0 - self.rotation_readout_fidelity / self.prep_fidelity).clamp(0.0, 0.5)
    }
}

/// Replaces the atom by the uncoupled error state with probability `1 − f`.
pub fn prep_error_channel(f_prep: f64) -> Result<KrausChannel> {
    check_probability("prep_fidelity", f_prep)?;
    let a = f_prep.sqrt();
    let b = (1.0 - f_prep).sqrt();
    let keep = CMatrix::identity(2, 2) * c(a, 0.0);
    let from_up =
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0), c(0.0, 0.0)]);
    let from_down =
        CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0)]);
    KrausChannel::new(vec![keep, from_up, from_down], true)
}

/// Gate acting only on the mode-matched fraction of the photon.
///
/// The unmatched part reflects off the coupling mirror without loss or
/// conditional phase.
pub fn mode_mismatch_channel(overlap: f64, branch: &GateBranch) -> Result<KrausChannel> {
    check_probability("mode_overlap", overlap)?;
    let gate = KrausChannel::new(vec![branch.as_matrix()], false)?;
    gate.mix(overlap, &KrausChannel::identity(4))
}

/// Gaussian detuning sample in rad/µs.
pub fn sample_jitter<R: Rng + ?Sized>(rng: &mut R, sigma_khz: f64) -> f64 {
    sample_detuning(rng, 0.0, sigma_khz)
}

/// Detuning drawn around a carrier offset, rad/µs.
pub fn sample_detuning<R: Rng + ?Sized>(rng: &mut R, offset_khz: f64, sigma_khz: f64) -> f64 {
    if sigma_khz <= 0.0 {
        return khz_to_angular(offset_khz);
    }
    let n = Normal::new(offset_khz, sigma_khz).expect("finite positive width");
    khz_to_angular(n.sample(rng))
}

/// Symmetric outcome flips with probability `e` in every analyzer basis.
///
/// As a channel this is a Pauli channel with equal X, Y and Z weights
/// `e/2`, which exists for `e ≤ 2/3`.
pub fn analyzer_error_channel(e: f64) -> Result<KrausChannel> {
    check_probability("photonic_meas_error", e)?;
    if e > 2.0 / 3.0 {
        return Err(Error::InvalidParameter {
            name: "photonic_meas_error".into(),
            reason: "flip probabilities above 2/3 in all bases are not a quantum channel; \
                     use the classical confusion instead"
                .into(),
        });
    }
    let id = (1.0 - 1.5 * e).sqrt();
    let each = (e / 2.0).sqrt();
    let x = CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(each, 0.0), c(each, 0.0), c(0.0, 0.0)],
    );
    let y = CMatrix::from_row_slice(
        2,
        2,
        &[c(0.0, 0.0), c(0.0, -each), c(0.0, each), c(0.0, 0.0)],
    );
    let z = CMatrix::from_row_slice(
        2,
        2,
        &[c(each, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-each, 0.0)],
    );
    KrausChannel::new(vec![CMatrix::identity(2, 2) * c(id, 0.0), x, y, z], true)
}

/// Two-outcome readout confusion, `matrix[read][true]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    /// Probability that outcome 0 is read as 1.
    pub flip_0: f64,
    /// Probability that outcome 1 is read as 0.
    pub flip_1: f64,
}

impl Confusion {
    pub const PERFECT: Confusion = Confusion {
        flip_0: 0.0,
        flip_1: 0.0,
    };

    pub fn symmetric(e: f64) -> Self {
        Self {
            flip_0: e,
            flip_1: e,
        }
    }

    /// This confusion followed by an extra symmetric flip `e`.
    pub fn then_symmetric(&self, e: f64) -> Self {
        Self {
            flip_0: self.flip_0 * (1.0 - e) + (1.0 - self.flip_0) * e,
            flip_1: self.flip_1 * (1.0 - e) + (1.0 - self.flip_1) * e,
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [
            [1.0 - self.flip_0, self.flip_1],
            [self.flip_0, 1.0 - self.flip_1],
        ]
    }

    pub fn flip_probability(&self, outcome: usize) -> f64 {
        if outcome == 0 {
            self.flip_0
        } else {
            self.flip_1
        }
    }

    /// Samples the reading given the true outcome.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, outcome: usize) -> usize {
        if rng.random::<f64>() < self.flip_probability(outcome) {
            1 - outcome
        } else {
            outcome
        }
    }
}

/// Applies per-qubit confusions to a joint outcome distribution. Outcome
/// bit `n − 1 − q` belongs to qubit `q`.
pub fn confuse(probs: &[f64], per_qubit: &[Confusion]) -> Vec<f64> {
    let n = per_qubit.len();
    let mut p = probs.to_vec();
    for (q, conf) in per_qubit.iter().enumerate() {
        let m = conf.matrix();
        let bit = 1usize << (n - 1 - q);
        let mut next = vec![0.0; p.len()];
        for (i, &v) in p.iter().enumerate() {
            let t = usize::from(i & bit != 0);
            for (r, row) in m.iter().enumerate() {
                let j = if r == 1 { i | bit } else { i & !bit };
                next[j] += row[t] * v;
            }
        }
        p = next;
    }
    p
}

/// Hyperfine label reported by fluorescence detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HyperfineLevel {
    F1,
    F2,
}

/// Threshold detector on cavity-enhanced fluorescence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionModel {
    pub mean_signal_photons: f64,
    pub dark_prob: f64,
    pub threshold: u32,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self::calibrated(0.996, 0.997)
    }
}

impl DetectionModel {
    /// From the bright-state detection probability and the dark-state
    /// silence probability at threshold one.
    pub fn calibrated(p_bright: f64, p_dark_silent: f64) -> Self {
        Self {
            mean_signal_photons: -(1.0 - p_bright).ln(),
            dark_prob: 1.0 - p_dark_silent,
            threshold: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_signal_photons.is_finite() && self.mean_signal_photons >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mean_signal_photons".into(),
                reason: format!("{} must be >= 0", self.mean_signal_photons),
            });
        }
        check_probability("dark_prob", self.dark_prob)?;
        if self.dark_prob >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "dark_prob".into(),
                reason: "must be below 1".into(),
            });
        }
        if self.threshold < 1 {
            return Err(Error::InvalidParameter {
                name: "threshold".into(),
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Mean dark count such that `P(count ≥ 1 | F=1) = dark_prob`.
    pub fn dark_mean(&self) -> f64 {
        -(1.0 - self.dark_prob).ln()
    }

    /// `P(F=2 read as F=1)`
    pub fn bright_miss(&self) -> f64 {
        poisson_cdf(self.threshold as u64 - 1, self.mean_signal_photons)
    }

    /// `P(F=1 read as F=2)`
    pub fn dark_false_positive(&self) -> f64 {
        1.0 - poisson_cdf(self.threshold as u64 - 1, self.dark_mean())
    }

    /// Balanced threshold fidelity.
    pub fn fidelity(&self) -> f64 {
        0.5 * ((1.0 - self.bright_miss()) + (1.0 - self.dark_false_positive()))
    }

    /// Readout confusion with outcome 0 = F=2 (spin up).
    pub fn confusion(&self) -> Confusion {
        Confusion {
            flip_0: self.bright_miss(),
            flip_1: self.dark_false_positive(),
        }
    }
}

pub(crate) fn poisson_cdf(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 1.0;
    }
    let mut term = (-mean).exp();
    let mut sum = term;
    for i in 1..=k {
        term *= mean / i as f64;
        sum += term;
    }
    sum.min(1.0)
}

fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// Simulates one fluorescence detection window.
pub fn hyperfine_detection<R: Rng + ?Sized>(
    true_state: HyperfineLevel,
    d: &DetectionModel,
    rng: &mut R,
) -> (HyperfineLevel, u64) {
    let count = match true_state {
        HyperfineLevel::F2 => sample_poisson(rng, d.mean_signal_photons),
        HyperfineLevel::F1 => sample_poisson(rng, d.dark_mean()),
    };
    let label = if count >= d.threshold as u64 {
        HyperfineLevel::F2
    } else {
        HyperfineLevel::F1
    };
    (label, count)
}

/// Channel on the atom left by a second photon of the same pulse.
///
/// The extra photon enters in `photon` and meets the same reflection
/// amplitudes; it is reflected, lost, or misses the cavity mode, and is
/// never analyzed. Tracing it out leaves a trace-preserving map that
/// dephases the atom.
pub fn extra_photon_channel(
    branch: &GateBranch,
    overlap: f64,
    photon: &PureState,
) -> Result<KrausChannel> {
    check_probability("mode_overlap", overlap)?;
    if photon.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: photon.dim(),
        });
    }
    let amps = branch.amplitudes();
    let lost: [C64; 4] = amps.map(|a| c((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0));
    let input = photon.amplitudes();
    let mut ops = Vec::new();
    let mut push = |weight: f64, diag: &[C64; 4]| {
        if weight <= 0.0 {
            return;
        }
        let s = weight.sqrt();
        for out in 0..2 {
            // ⟨out|_photon K |in⟩_photon as an atom operator
            let m = CMatrix::from_fn(2, 2, |ai, aj| {
                if ai != aj {
                    return c(0.0, 0.0);
                }
                diag[2 * ai + out] * input[out] * s
            });
            ops.push(m);
        }
    };
    push(overlap, &amps);
    push(overlap, &lost);
    push(1.0 - overlap, &[c(1.0, 0.0); 4]);
    KrausChannel::new(ops, true)
}

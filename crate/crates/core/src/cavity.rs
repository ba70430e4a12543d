//! Reflection of a photon from the atom–cavity system and the resulting
//! conditional-phase gate.
//!
//! Rates are stored in angular units of rad/µs, so `2π·6.7` means a
//! coupling of 6.7 MHz.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::qlin::{c, CMatrix, KrausChannel, Tensor, UnitaryOp, C64};

/// Converts a frequency in MHz to angular rad/µs.
pub fn mhz_to_angular(mhz: f64) -> f64 {
    2.0 * PI * mhz
}

pub fn khz_to_angular(khz: f64) -> f64 {
    mhz_to_angular(khz * 1e-3)
}

pub fn ghz_to_angular(ghz: f64) -> f64 {
    mhz_to_angular(ghz * 1e3)
}

/// Mirror transmissions of the single-sided cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorBudget {
    pub t_coupling_ppm: f64,
    /// High-reflector transmission plus scattering and absorption.
    pub loss_other_ppm: f64,
}

impl Default for MirrorBudget {
    fn default() -> Self {
        Self {
            t_coupling_ppm: 95.0,
            loss_other_ppm: 8.0,
        }
    }
}

impl MirrorBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_coupling_ppm", self.t_coupling_ppm),
            ("loss_other_ppm", self.loss_other_ppm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("{v} must be a finite value >= 0"),
                });
            }
        }
        if self.t_coupling_ppm + self.loss_other_ppm <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "t_coupling_ppm".into(),
                reason: "total mirror loss must be positive".into(),
            });
        }
        Ok(())
    }

    /// `κ_in / κ`
    pub fn coupling_fraction(&self) -> f64 {
        self.t_coupling_ppm / (self.t_coupling_ppm + self.loss_other_ppm)
    }
}

/// Cavity QED rates and detunings, angular units (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub g: f64,
    pub kappa: f64,
    pub kappa_in: f64,
    pub gamma: f64,
    pub delta_c: f64,
    pub delta_a: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self::from_mhz(6.7, 2.5, 3.0, &MirrorBudget::default())
    }
}

impl CavityParams {
    /// Resonant parameters from plain-MHz rates and a mirror budget.
    pub fn from_mhz(g_mhz: f64, kappa_mhz: f64, gamma_mhz: f64, mirrors: &MirrorBudget) -> Self {
        let kappa = mhz_to_angular(kappa_mhz);
        Self {
            g: mhz_to_angular(g_mhz),
            kappa,
            kappa_in: kappa * mirrors.coupling_fraction(),
            gamma: mhz_to_angular(gamma_mhz),
            delta_c: 0.0,
            delta_a: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g", self.g),
            ("kappa", self.kappa),
            ("kappa_in", self.kappa_in),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("{v} must be a positive rate"),
                });
            }
        }
        if self.kappa_in > self.kappa * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "kappa_in".into(),
                reason: format!("{} exceeds kappa {}", self.kappa_in, self.kappa),
            });
        }
        if !(self.delta_c.is_finite() && self.delta_a.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta".into(),
                reason: "detunings must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn with_detuning(mut self, delta_c: f64, delta_a: f64) -> Self {
        self.delta_c = delta_c;
        self.delta_a = delta_a;
        self
    }

    /// `C = g²/(2κγ)`
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (2.0 * self.kappa * self.gamma)
    }
}

/// Steady-state reflection amplitude of the single-sided cavity.
///
/// `r = 1 − 2κ_in(iΔa + γ) / [(iΔc + κ)(iΔa + γ) + g²]`, with the coupling
/// switched off for the uncoupled branches.
pub fn reflection_coefficient(p: &CavityParams, coupled: bool) -> C64 {
    let g2 = if coupled { p.g * p.g } else { 0.0 };
    let atom = c(p.gamma, p.delta_a);
    let cav = c(p.kappa, p.delta_c);
    c(1.0, 0.0) - atom * (2.0 * p.kappa_in) / (cav * atom + g2)
}

/// Reflection averaged over a transform-limited Gaussian pulse spectrum.
///
/// For a temporal intensity FWHM `τ` the spectral intensity is Gaussian
/// with standard deviation `√(2 ln 2)/τ`.
pub fn spectrally_averaged_reflection(p: &CavityParams, coupled: bool, fwhm_us: f64) -> C64 {
    let spread = (2.0 * std::f64::consts::LN_2).sqrt() / fwhm_us;
    gauss_hermite(32)
        .iter()
        .map(|&(x, w)| {
            let shifted = p.with_detuning(p.delta_c + spread * x, p.delta_a + spread * x);
            reflection_coefficient(&shifted, coupled) * w
        })
        .sum()
}

/// Nodes and normalized weights for expectations over a standard normal.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    // Golub–Welsch on the probabilists' Hermite recurrence.
    let n = n.max(1);
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = out.iter().map(|p| p.1).sum();
    for p in &mut out {
        p.1 /= total;
    }
    out
}

/// Atomic qubit label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AtomState {
    /// `|F=2, m=2⟩`
    Up,
    /// `|F=1, m=1⟩`
    Down,
}

/// Photon circular polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    /// Right circular.
    Up,
    /// Left circular.
    Down,
}

/// Excited-state light shifts and detunings, GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelScheme {
    pub stark_shift_33_ghz: f64,
    pub stark_shift_31_ghz: f64,
    /// Detuning of `|2,2⟩ ↔ |3,1⟩` from the probe.
    pub spurious_detuning_ghz: f64,
    /// Detuning of every transition out of F=1.
    pub f1_detuning_ghz: f64,
    /// Shift of `|3,m⟩` indexed by `|m| = 0..=3`.
    pub zeeman_shifts_ghz: [f64; 4],
}

impl Default for LevelScheme {
    fn default() -> Self {
        Self {
            stark_shift_33_ghz: 0.05,
            stark_shift_31_ghz: 0.15,
            spurious_detuning_ghz: 0.1,
            f1_detuning_ghz: 7.0,
            zeeman_shifts_ghz: [0.16, 0.15, 0.10, 0.05],
        }
    }
}

impl LevelScheme {
    pub fn validate(&self) -> Result<()> {
        let t = &self.zeeman_shifts_ghz;
        if t.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "zeeman_shifts_ghz".into(),
                reason: "shifts must be positive".into(),
            });
        }
        if t.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter {
                name: "zeeman_shifts_ghz".into(),
                reason: "shifts must decrease with |m|".into(),
            });
        }
        for (name, v) in [
            ("spurious_detuning_ghz", self.spurious_detuning_ghz),
            ("f1_detuning_ghz", self.f1_detuning_ghz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: format!("{v} must be positive"),
                });
            }
        }
        Ok(())
    }

    /// Detuning of the nearest transition addressed by this combination.
    pub fn nearest_detuning_ghz(&self, atom: AtomState, pol: Polarization) -> f64 {
        match (atom, pol) {
            (AtomState::Up, Polarization::Up) => 0.0,
            (AtomState::Up, Polarization::Down) => self.spurious_detuning_ghz,
            (AtomState::Down, _) => self.f1_detuning_ghz,
        }
    }
}

/// Detunings beyond this multiple of `g` leave the cavity effectively empty.
pub const COUPLING_MARGIN: f64 = 10.0;

/// True when the nearest transition lies within the coupling margin.
pub fn is_strongly_coupled(
    atom: AtomState,
    pol: Polarization,
    scheme: &LevelScheme,
    p: &CavityParams,
) -> bool {
    let detuning = ghz_to_angular(scheme.nearest_detuning_ghz(atom, pol));
    detuning <= COUPLING_MARGIN * p.g
}

/// Complex reflection amplitudes in the `(↑a↑p, ↑a↓p, ↓a↑p, ↓a↓p)` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateBranch {
    amplitudes: [C64; 4],
}

impl GateBranch {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        if let Some(a) = amplitudes.iter().find(|a| a.norm() > 1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "amplitude".into(),
                reason: format!("|{a}| exceeds 1"),
            });
        }
        Ok(Self { amplitudes })
    }

    /// One amplitude for the coupled pair, another for the other three.
    pub fn conditional(coupled: C64, uncoupled: C64) -> Result<Self> {
        Self::new([coupled, uncoupled, uncoupled, uncoupled])
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        self.amplitudes
    }

    pub fn coupled(&self) -> C64 {
        self.amplitudes[0]
    }

    pub fn uncoupled(&self) -> C64 {
        self.amplitudes[3]
    }

    pub fn as_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.amplitudes))
    }

    /// Probability that a photon in each basis pair is not reflected.
    pub fn losses(&self) -> [f64; 4] {
        self.amplitudes.map(|a| 1.0 - a.norm_sqr())
    }
}

/// Conditional phase gate `diag(+1, −1, −1, −1)`.
pub fn ideal_gate() -> UnitaryOp {
    UnitaryOp::from_matrix_unchecked(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c(1.0, 0.0),
        c(-1.0, 0.0),
        c(-1.0, 0.0),
        c(-1.0, 0.0),
    ])))
}

/// The gate dressed with photon basis changes and an atom-local Z.
///
/// The result is the textbook CNOT matrix written in the (atom z, photon x)
/// basis: photon column 0 is `|↑x⟩`, column 1 is `|↓x⟩`, and `↑a` flips.
pub fn cnot_gate() -> UnitaryOp {
    let h = UnitaryOp::hadamard();
    let pre = UnitaryOp::identity(1).tensor(&h).expect("2 qubits");
    let post = UnitaryOp::pauli_z().tensor(&h).expect("2 qubits");
    post.compose(&ideal_gate())
        .and_then(|g| g.compose(&pre))
        .expect("matching dimensions")
}

/// Gate with branch-dependent photon loss, post-selected on reflection.
pub fn lossy_gate_channel(loss_coupled: f64, loss_uncoupled: f64) -> Result<KrausChannel> {
    check_probability("loss_coupled", loss_coupled)?;
    check_probability("loss_uncoupled", loss_uncoupled)?;
    let ac = c((1.0 - loss_coupled).sqrt(), 0.0);
    let au = c(-(1.0 - loss_uncoupled).sqrt(), 0.0);
    let branch = GateBranch::conditional(ac, au)?;
    KrausChannel::new(vec![branch.as_matrix()], false)
}

/// Resonant reflection amplitudes rescaled to measured branch losses.
///
/// The detuning dependence follows the cavity model while the magnitude at
/// resonance is pinned to `√(1 − loss)`.
/// With `pulse_fwhm_us` set, reflection is averaged over the pulse spectrum.
pub fn calibrated_branch(
    p: &CavityParams,
    loss_coupled: f64,
    loss_uncoupled: f64,
    pulse_fwhm_us: Option<f64>,
) -> Result<GateBranch> {
    check_probability("loss_coupled", loss_coupled)?;
    check_probability("loss_uncoupled", loss_uncoupled)?;
    let refl = |q: &CavityParams, coupled: bool| match pulse_fwhm_us {
        Some(t) => spectrally_averaged_reflection(q, coupled, t),
        None => reflection_coefficient(q, coupled),
    };
    let resonant = p.with_detuning(0.0, 0.0);
    let rc0 = refl(&resonant, true).norm();
    let ru0 = refl(&resonant, false).norm();
    if rc0 < 1e-12 || ru0 < 1e-12 {
        return Err(Error::InvalidParameter {
            name: "cavity".into(),
            reason: "resonant reflection vanishes; cannot calibrate".into(),
        });
    }
    let rc = refl(p, true) * ((1.0 - loss_coupled).sqrt() / rc0);
    let ru = refl(p, false) * ((1.0 - loss_uncoupled).sqrt() / ru0);
    GateBranch::conditional(clamp_unit(rc), clamp_unit(ru))
}

fn clamp_unit(z: C64) -> C64 {
    if z.norm() > 1.0 {
        z / z.norm()
    } else {
        z
    }
}

/// Model prediction for the two branch losses at resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPrediction {
    pub loss_coupled: f64,
    pub loss_uncoupled: f64,
}

pub fn loss_from_first_principles(p: &CavityParams, m: &MirrorBudget) -> Result<LossPrediction> {
    m.validate()?;
    let mut q = p.with_detuning(0.0, 0.0);
    q.kappa_in = q.kappa * m.coupling_fraction();
    q.validate()?;
    Ok(LossPrediction {
        loss_coupled: 1.0 - reflection_coefficient(&q, true).norm_sqr(),
        loss_uncoupled: 1.0 - reflection_coefficient(&q, false).norm_sqr(),
    })
}

/// Phase of the coupled reflection relative to the uncoupled one, in `[0, 2π)`.
pub fn phase_contrast(p: &CavityParams) -> f64 {
    let d = reflection_coefficient(p, true).arg() - reflection_coefficient(p, false).arg();
    d.rem_euclid(2.0 * PI)
}

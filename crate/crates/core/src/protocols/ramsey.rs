//! Ramsey fringes of the atomic qubit.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::cavity::khz_to_angular;
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::qlin::{c, rotation, PureState, UnitaryOp};
use crate::rng::{stream, tag};

use super::{Estimate, ProtocolResult, SettingResult, Table};

/// Least-squares fit `P = A·cos(x + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

impl FringeFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (x + self.phase).cos() + self.offset
    }

    /// Peak-to-peak swing `2A`.
    pub fn contrast(&self) -> f64 {
        2.0 * self.amplitude
    }

    pub fn peak(&self) -> f64 {
        self.offset + self.amplitude
    }
}

/// Fits a sinusoid of known period in `x` (radians).
pub fn fit_fringe(x: &[f64], y: &[f64]) -> Result<FringeFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::Fit(format!(
            "{} points cannot fix 3 parameters",
            x.len()
        )));
    }
    let design = DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => x[i].cos(),
        1 => x[i].sin(),
        _ => 1.0,
    });
    let rhs = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest < 1e-9 * svd.singular_values.max() {
        return Err(Error::Fit("grid does not resolve the fringe".into()));
    }
    let beta = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let (a, b) = (beta[0], beta[1]);
    let resid = &design * &beta - rhs;
    Ok(FringeFit {
        amplitude: a.hypot(b),
        phase: (-b).atan2(a),
        offset: beta[2],
        rms_residual: (resid.norm_squared() / x.len() as f64).sqrt(),
    })
}

/// Transfer probability `|⟨↓|R₂ U(T) R₁|↑⟩|²` for hard π/2 pulses.
fn transfer(delta: f64, separation_us: f64, phase2: f64) -> f64 {
    let half = 0.5 * delta * separation_us;
    let free = UnitaryOp::diagonal(&[c(half.cos(), half.sin()), c(half.cos(), -half.sin())])
        .expect("unit phases");
    let first = rotation(std::f64::consts::FRAC_PI_2, 0.0);
    let second = rotation(std::f64::consts::FRAC_PI_2, phase2);
    let out = PureState::up()
        .apply(&first)
        .and_then(|s| s.apply(&free))
        .and_then(|s| s.apply(&second))
        .expect("qubit");
    out.amplitudes()[1].norm_sqr()
}

/// Transfer curve over `grid_khz` with the second pulse shifted by
/// `phase2`. Readout and rotation errors enter as a symmetric flip.
pub fn run_ramsey(cfg: &RunConfig, grid_khz: &[f64], phase2: f64) -> Result<ProtocolResult> {
    if grid_khz.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            reason: "detuning grid is empty".into(),
        });
    }
    let f = cfg.imperfections.rotation_readout_fidelity;
    let t = cfg.ramsey.separation_us;
    let mut res = ProtocolResult::new("ramsey", cfg);
    let mut x = Vec::with_capacity(grid_khz.len());
    let mut y = Vec::with_capacity(grid_khz.len());
    for (i, &khz) in grid_khz.iter().enumerate() {
        let ideal = transfer(khz_to_angular(khz), t, phase2);
        let p = (1.0 - f) + (2.0 * f - 1.0) * ideal;
        let (observed, counts) = match cfg.mode {
            Mode::Analytic => (p, None),
            Mode::MonteCarlo => {
                let mut rng = stream(cfg.seed, &[tag("ramsey"), i as u64]);
                let k = Binomial::new(cfg.trials, p.clamp(0.0, 1.0))
                    .expect("valid binomial")
                    .sample(&mut rng);
                (k as f64 / cfg.trials as f64, Some(vec![k, cfg.trials - k]))
            }
        };
        res.settings.push(SettingResult {
            setting: format!("{khz} kHz"),
            probabilities: vec![observed, 1.0 - observed],
            counts,
        });
        x.push(khz_to_angular(khz) * t);
        y.push(observed);
    }
    let fit = fit_fringe(&x, &y)?;
    res.set("amplitude", Estimate::exact(fit.amplitude));
    res.set("contrast", Estimate::exact(fit.contrast()));
    res.set("peak_transfer", Estimate::exact(fit.peak()));
    res.set("fitted_phase", Estimate::exact(fit.phase));
    res.set("offset", Estimate::exact(fit.offset));
    res.set("rms_residual", Estimate::exact(fit.rms_residual));
    res.set("phase2", Estimate::exact(phase2));
    let mut table = Table::new(&["detuning_khz", "transfer", "fit"]);
    for ((&khz, &xi), &yi) in grid_khz.iter().zip(&x).zip(&y) {
        table.rows.push(vec![khz, yi, fit.eval(xi)]);
    }
    res.tables.insert("ramsey_curve".into(), table);
    Ok(res)
}

//! Gate protocols: truth table, atom–photon Bell state, GHZ state and the
//! photon–photon eraser.

use std::f64::consts::PI;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::qlin::{
    fidelity_pure, optimal_phase_fidelity, phased_superposition, rotation, DensityMatrix,
    PureState, Tensor,
};
use crate::rng::tag;
use crate::tomography::{
    mle_reconstruct, monte_carlo_errors, reconstruct_exact, Basis, CountsRecord, FrequencyData,
    MeasurementSetting, Metric,
};

use super::engine::{
    analytic_ensemble, readout_probabilities, sample_setting, GateModel, Scenario,
};
use super::{Estimate, ProtocolResult, SettingResult, Table};

/// Truth-table inputs as (label, atom up, photon up_x), in row order.
pub const TRUTH_TABLE_INPUTS: [(&str, bool, bool); 4] = [
    ("↓↓x", false, false),
    ("↓↑x", false, true),
    ("↑↓x", true, false),
    ("↑↑x", true, true),
];

/// Position of an input's label in the (Z, X) outcome vector.
fn zx_index(atom_up: bool, photon_up: bool) -> usize {
    2 * usize::from(!atom_up) + usize::from(!photon_up)
}

fn kron(states: &[PureState]) -> PureState {
    crate::qlin::tensor_all(states).expect("small product state")
}

/// Target `(|u⟩ + e^{−iφ}|v⟩)/√2` at `φ = 0`.
struct Target {
    u: PureState,
    v: PureState,
}

impl Target {
    fn state(&self) -> PureState {
        phased_superposition(&self.u, &self.v, 0.0).expect("orthogonal parts")
    }
}

fn bell_target() -> Target {
    Target {
        u: PureState::up()
            .tensor(&PureState::up_x())
            .expect("2 qubits"),
        v: PureState::down()
            .tensor(&PureState::down_x())
            .expect("2 qubits"),
    }
}

fn ghz_target() -> Target {
    let v = kron(&[PureState::down(), PureState::down_x(), PureState::down_x()]);
    Target {
        u: kron(&[PureState::up(), PureState::up_x(), PureState::up_x()]),
        v: v.scale_phase(PI),
    }
}

fn photon_pair_target(plus: bool) -> Target {
    let v = PureState::down_x()
        .tensor(&PureState::down_x())
        .expect("2 qubits");
    Target {
        u: PureState::up_x()
            .tensor(&PureState::up_x())
            .expect("2 qubits"),
        v: if plus { v } else { v.scale_phase(PI) },
    }
}

/// Statistics for one setting, exact or sampled.
struct Collected {
    setting: MeasurementSetting,
    probabilities: Vec<f64>,
    counts: Option<Vec<u64>>,
}

fn collect(
    cfg: &RunConfig,
    model: &GateModel,
    sc: &Scenario,
    settings: &[MeasurementSetting],
    protocol: &str,
    unit_offset: u64,
) -> Result<Vec<Collected>> {
    match cfg.mode {
        Mode::Analytic => {
            let ens = analytic_ensemble(model, sc)?;
            settings
                .iter()
                .map(|s| {
                    Ok(Collected {
                        setting: s.clone(),
                        probabilities: readout_probabilities(model, sc, &ens, s)?,
                        counts: None,
                    })
                })
                .collect()
        }
        Mode::MonteCarlo => settings
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sampled = sample_setting(
                    model,
                    sc,
                    s,
                    cfg.trials,
                    cfg.seed,
                    tag(protocol),
                    unit_offset + i as u64,
                )?;
                Ok(Collected {
                    setting: s.clone(),
                    probabilities: sampled.record.frequencies(),
                    counts: Some(sampled.record.counts),
                })
            })
            .collect(),
    }
}

/// Reconstructs a state and reports fidelity figures under `key`.
fn tomography_report(
    cfg: &RunConfig,
    res: &mut ProtocolResult,
    key: &str,
    data: &[Collected],
    target: &Target,
    bootstrap_unit: u64,
) -> Result<DensityMatrix> {
    let opts = &cfg.tomography.mle;
    let target_state = target.state();
    let rho = match cfg.mode {
        Mode::Analytic => {
            let settings: Vec<_> = data.iter().map(|d| d.setting.clone()).collect();
            let probs: Vec<_> = data.iter().map(|d| d.probabilities.clone()).collect();
            let (rho, method) = reconstruct_exact(&FrequencyData::exact(&settings, &probs), opts)?;
            if method != "linear-inversion" {
                res.warnings.push(format!(
                    "{key}: reconstruction fell back to maximum likelihood"
                ));
            }
            let f = fidelity_pure(&rho, &target_state)?;
            let opt = optimal_phase_fidelity(&rho, &target.u, &target.v)?;
            res.set(&format!("{key}.fidelity"), Estimate::exact(f));
            res.set(
                &format!("{key}.optimal_phase_pi"),
                Estimate::exact(opt.phi / PI),
            );
            res.set(
                &format!("{key}.optimal_fidelity"),
                Estimate::exact(opt.fidelity),
            );
            rho
        }
        Mode::MonteCarlo => {
            let records = data
                .iter()
                .map(|d| CountsRecord::new(d.setting.clone(), d.counts.clone().expect("sampled")))
                .collect::<Result<Vec<_>>>()?;
            let report = mle_reconstruct(&records, opts)?;
            if !report.converged {
                res.warnings
                    .push(format!("{key}: maximum likelihood did not converge"));
            }
            res.flags
                .insert(format!("{key}.mle_monotone"), report.monotone);
            let fid = |r: &DensityMatrix| fidelity_pure(r, &target_state).unwrap_or(f64::NAN);
            let opt_f = |r: &DensityMatrix| {
                optimal_phase_fidelity(r, &target.u, &target.v)
                    .map(|o| o.fidelity)
                    .unwrap_or(f64::NAN)
            };
            let opt_phi = |r: &DensityMatrix| {
                optimal_phase_fidelity(r, &target.u, &target.v)
                    .map(|o| o.phi / PI)
                    .unwrap_or(f64::NAN)
            };
            let metrics: [Metric<'_>; 3] = [
                ("fidelity", &fid),
                ("optimal_fidelity", &opt_f),
                ("optimal_phase_pi", &opt_phi),
            ];
            let errs = monte_carlo_errors(
                &records,
                &metrics,
                cfg.tomography.resamples,
                cfg.seed ^ bootstrap_unit,
                opts,
            )?;
            for (name, f) in metrics {
                res.set(
                    &format!("{key}.{name}"),
                    Estimate::with_error(f(&report.rho), errs[name]),
                );
            }
            report.rho
        }
    };
    res.density_matrices.insert(key.to_string(), rho.clone());
    Ok(rho)
}

fn push_settings(res: &mut ProtocolResult, prefix: &str, data: &[Collected]) {
    for d in data {
        res.settings.push(SettingResult {
            setting: format!("{prefix}{}", d.setting),
            probabilities: d.probabilities.clone(),
            counts: d.counts.clone(),
        });
    }
}

fn prepared(atom_up: bool, photon_up: bool) -> Scenario {
    Scenario {
        atom: if atom_up {
            PureState::up()
        } else {
            PureState::down()
        },
        photons: vec![if photon_up {
            PureState::up_x()
        } else {
            PureState::down_x()
        }],
        atom_rotation: None,
    }
}

/// Measured output distribution for each of the four z/x inputs.
///
/// Rows and columns follow [`TRUTH_TABLE_INPUTS`]. Preselection does not
/// apply to this measurement, and preparation error only affects the
/// bright control.
pub fn run_truth_table(cfg: &RunConfig) -> Result<ProtocolResult> {
    let mut model = GateModel::new(cfg, &cfg.pulses.truth_table);
    model.preselection_pass = 1.0;
    let setting = MeasurementSetting::new(vec![Basis::Z, Basis::X])?;
    let mut res = ProtocolResult::new("truth-table", cfg);
    let mut table = Table::new(&["↓↓x", "↓↑x", "↑↓x", "↑↑x"]);
    let mut row_totals = Vec::new();
    for (row, &(label, atom_up, photon_up)) in TRUTH_TABLE_INPUTS.iter().enumerate() {
        let sc = prepared(atom_up, photon_up);
        // pumping into F=1 leaves no atom in the bright manifold
        let mut model = model.clone();
        if !atom_up {
            model.prep_fidelity = 1.0;
        }
        let d = collect(
            cfg,
            &model,
            &sc,
            std::slice::from_ref(&setting),
            "truth-table",
            row as u64,
        )?
        .remove(0);
        let ordered: Vec<f64> = TRUTH_TABLE_INPUTS
            .iter()
            .map(|&(_, a, p)| d.probabilities[zx_index(a, p)])
            .collect();
        row_totals.push(d.counts.as_ref().map(|c| c.iter().sum::<u64>()));
        res.settings.push(SettingResult {
            setting: format!("{label}/{}", d.setting),
            probabilities: d.probabilities,
            counts: d.counts,
        });
        table.rows.push(ordered);
        table.row_labels.push(label.to_string());
    }
    let entry = |r: usize, c: usize| {
        let p = table.rows[r][c];
        let se = row_totals[r].map(|n| (p * (1.0 - p) / n as f64).sqrt());
        (p, se)
    };
    let mean = |a: (f64, Option<f64>), b: (f64, Option<f64>)| {
        let v = 0.5 * (a.0 + b.0);
        match (a.1, b.1) {
            (Some(x), Some(y)) => Estimate::with_error(v, 0.5 * x.hypot(y)),
            _ => Estimate::exact(v),
        }
    };
    res.set("identity_probability", mean(entry(0, 0), entry(1, 1)));
    res.set("flip_probability", mean(entry(2, 3), entry(3, 2)));
    let cnot = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
    ];
    let dist = table
        .rows
        .iter()
        .zip(cnot)
        .flat_map(|(r, c)| {
            r.iter()
                .zip(c)
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    res.set("max_deviation_from_cnot", Estimate::exact(dist));
    res.tables.insert("truth_table".into(), table);
    Ok(res)
}

fn entangling_scenario(photons: usize, rotate: bool) -> Scenario {
    Scenario {
        atom: PureState::down_x(),
        photons: vec![PureState::down_x(); photons],
        atom_rotation: rotate.then(|| rotation(PI / 2.0, -PI / 2.0)),
    }
}

/// Atom–photon entanglement from one reflected photon, analysed by
/// two-qubit tomography.
pub fn run_bell(cfg: &RunConfig) -> Result<ProtocolResult> {
    let model = GateModel::new(cfg, &cfg.pulses.bell);
    let sc = entangling_scenario(1, false);
    let mut res = ProtocolResult::new("bell", cfg);
    let data = collect(cfg, &model, &sc, &MeasurementSetting::all(2), "bell", 0)?;
    push_settings(&mut res, "", &data);
    tomography_report(cfg, &mut res, "bell", &data, &bell_target(), tag("bell"))?;
    Ok(res)
}

/// Three-qubit GHZ state from two photons reflected in turn.
pub fn run_ghz(cfg: &RunConfig) -> Result<ProtocolResult> {
    let model = GateModel::new(cfg, &cfg.pulses.ghz);
    let sc = entangling_scenario(2, false);
    let mut res = ProtocolResult::new("ghz", cfg);
    let data = collect(cfg, &model, &sc, &MeasurementSetting::all(3), "ghz", 0)?;
    push_settings(&mut res, "", &data);
    tomography_report(cfg, &mut res, "ghz", &data, &ghz_target(), tag("ghz"))?;
    Ok(res)
}

/// Photon–photon entanglement heralded by measuring the atom after a π/2
/// rotation. Atom outcome 1 (F=1) heralds Φ⁺, outcome 0 heralds Φ⁻.
pub fn run_eraser(cfg: &RunConfig) -> Result<ProtocolResult> {
    let model = GateModel::new(cfg, &cfg.pulses.eraser);
    let sc = entangling_scenario(2, true);
    let mut res = ProtocolResult::new("eraser", cfg);
    let photon_settings = MeasurementSetting::all(2);
    let settings: Vec<MeasurementSetting> = photon_settings
        .iter()
        .map(|s| {
            let mut b = vec![Basis::Z];
            b.extend_from_slice(s.bases());
            MeasurementSetting::new(b)
        })
        .collect::<Result<_>>()?;
    let data = collect(cfg, &model, &sc, &settings, "eraser", 0)?;
    push_settings(&mut res, "", &data);

    // split each three-qubit setting by the atomic outcome
    let mut heralded = [Vec::new(), Vec::new()];
    let mut herald_prob = [0.0; 2];
    for (d, ps) in data.iter().zip(&photon_settings) {
        for (a, out) in heralded.iter_mut().enumerate() {
            let p = &d.probabilities[4 * a..4 * a + 4];
            let mass: f64 = p.iter().sum();
            herald_prob[a] += mass / data.len() as f64;
            let counts = d.counts.as_ref().map(|c| c[4 * a..4 * a + 4].to_vec());
            if mass <= 0.0 || counts.as_ref().is_some_and(|c| c.iter().sum::<u64>() == 0) {
                return Err(Error::Starvation(format!(" for atom outcome {a} in {ps}")));
            }
            out.push(Collected {
                setting: ps.clone(),
                probabilities: p.iter().map(|x| x / mass).collect(),
                counts,
            });
        }
    }
    for (a, key, plus) in [(1usize, "phi_plus", true), (0, "phi_minus", false)] {
        res.set(
            &format!("{key}.herald_probability"),
            Estimate::exact(herald_prob[a]),
        );
        tomography_report(
            cfg,
            &mut res,
            key,
            &heralded[a],
            &photon_pair_target(plus),
            tag(key),
        )?;
    }
    Ok(res)
}

//! Browser bindings for the interactive demo page.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented on
//! each function.

use atomgate::cavity::{mhz_to_angular, reflection_coefficient};
use atomgate::config::RunConfig;
use atomgate::protocols::{run_bell, run_ramsey};
use atomgate::Result;
use wasm_bindgen::prelude::*;

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

pub fn reflection_points(
    g_mhz: f64,
    kappa_mhz: f64,
    gamma_mhz: f64,
    span_mhz: f64,
    points: usize,
) -> Result<Vec<f64>> {
    let mut cfg = RunConfig::paper();
    cfg.cavity.g_mhz = g_mhz;
    cfg.cavity.kappa_mhz = kappa_mhz;
    cfg.cavity.gamma_mhz = gamma_mhz;
    cfg.validate()?;
    let base = cfg.cavity.params(&cfg.mirrors);
    let n = points.max(2);
    let mut out = Vec::with_capacity(5 * n);
    for i in 0..n {
        let mhz = -span_mhz + 2.0 * span_mhz * i as f64 / (n - 1) as f64;
        let d = mhz_to_angular(mhz);
        let p = base.with_detuning(d, d);
        let rc = reflection_coefficient(&p, true);
        let ru = reflection_coefficient(&p, false);
        out.extend([mhz, rc.norm(), rc.arg(), ru.norm(), ru.arg()]);
    }
    Ok(out)
}

pub fn bell_state(
    overlap: f64,
    prep: f64,
    jitter_khz: f64,
    offset_khz: f64,
    analyzer_error: f64,
) -> Result<Vec<f64>> {
    let mut cfg = RunConfig::paper();
    let imp = &mut cfg.imperfections;
    imp.mode_overlap = overlap;
    imp.prep_fidelity = prep;
    imp.freq_jitter_khz = jitter_khz;
    imp.photonic_meas_error = analyzer_error;
    cfg.pulses.bell.carrier_offset_khz = offset_khz;
    cfg.validate()?;
    let res = run_bell(&cfg)?;
    let m = res.density_matrices["bell"].matrix();
    let mut out = vec![
        res.value("bell.fidelity"),
        res.value("bell.optimal_fidelity"),
        res.value("bell.optimal_phase_pi"),
    ];
    out.extend(m.iter().map(|z| z.re));
    out.extend(m.iter().map(|z| z.im));
    Ok(out)
}

pub fn ramsey_points(separation_us: f64, phase2: f64, readout_fidelity: f64) -> Result<Vec<f64>> {
    let mut cfg = RunConfig::paper();
    cfg.ramsey.separation_us = separation_us;
    cfg.imperfections.rotation_readout_fidelity = readout_fidelity;
    cfg.validate()?;
    let res = run_ramsey(&cfg, &cfg.ramsey.grid_khz(), phase2)?;
    let mut out = vec![res.value("contrast"), res.value("peak_transfer")];
    out.extend(res.tables["ramsey_curve"].rows.iter().flatten());
    Ok(out)
}

/// Reflection spectrum against laser detuning from the common resonance.
/// Five values per point: detuning (MHz), |r| and arg r coupled, then
/// uncoupled.
#[wasm_bindgen(js_name = reflectionCurve)]
pub fn reflection_curve(
    g_mhz: f64,
    kappa_mhz: f64,
    gamma_mhz: f64,
    span_mhz: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(reflection_points(
        g_mhz, kappa_mhz, gamma_mhz, span_mhz, points,
    ))
}

/// Reconstructed atom-photon state: fidelity, best fidelity over the
/// relative phase, that phase in units of π, then 16 real and 16 imaginary
/// parts of ρ in row-major order.
#[wasm_bindgen(js_name = bellDensity)]
pub fn bell_density(
    overlap: f64,
    prep: f64,
    jitter_khz: f64,
    offset_khz: f64,
    analyzer_error: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(bell_state(
        overlap,
        prep,
        jitter_khz,
        offset_khz,
        analyzer_error,
    ))
}

/// Ramsey fringe: contrast, peak transfer, then (detuning kHz, transfer,
/// fit) triples.
#[wasm_bindgen(js_name = ramseyCurve)]
pub fn ramsey_curve(
    separation_us: f64,
    phase2: f64,
    readout_fidelity: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(ramsey_points(separation_us, phase2, readout_fidelity))
}

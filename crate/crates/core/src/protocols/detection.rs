//! Hyperfine state detection by fluorescence counting.

use crate::config::{Mode, RunConfig};
use crate::error::Result;
use crate::pulse::{hyperfine_detection, poisson_cdf, HyperfineLevel};
use crate::rng::{chunks, stream, tag};

use super::{Estimate, ProtocolResult, SettingResult, Table};

/// Counts at or above this bin are folded into it.
pub const HISTOGRAM_BINS: usize = 21;

fn poisson_histogram(mean: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(HISTOGRAM_BINS);
    let mut below = 0.0;
    for k in 0..HISTOGRAM_BINS as u64 - 1 {
        let cdf = poisson_cdf(k, mean);
        out.push(cdf - below);
        below = cdf;
    }
    out.push(1.0 - below);
    out
}

struct Sampled {
    histogram: Vec<u64>,
    bright: u64,
}

fn sample_level(cfg: &RunConfig, level: HyperfineLevel) -> Sampled {
    let unit = match level {
        HyperfineLevel::F1 => 1,
        HyperfineLevel::F2 => 2,
    };
    let parts = chunks(cfg.trials);
    let per_chunk = crate::par::map_indices(parts.len(), |i| {
        let (chunk, size) = parts[i];
        let mut rng = stream(cfg.seed, &[tag("state-detection"), unit, chunk]);
        let mut hist = vec![0u64; HISTOGRAM_BINS];
        let mut bright = 0u64;
        for _ in 0..size {
            let (label, count) = hyperfine_detection(level, &cfg.detection, &mut rng);
            hist[(count as usize).min(HISTOGRAM_BINS - 1)] += 1;
            bright += u64::from(label == HyperfineLevel::F2);
        }
        (hist, bright)
    });
    let mut histogram = vec![0u64; HISTOGRAM_BINS];
    let mut bright = 0;
    for (h, b) in per_chunk {
        for (a, x) in histogram.iter_mut().zip(h) {
            *a += x;
        }
        bright += b;
    }
    Sampled { histogram, bright }
}

/// Count histograms for both hyperfine levels and the balanced
/// threshold fidelity.
pub fn run_state_detection(cfg: &RunConfig) -> Result<ProtocolResult> {
    let d = &cfg.detection;
    let mut res = ProtocolResult::new("state-detection", cfg);
    res.set("fidelity_model", Estimate::exact(d.fidelity()));
    res.set("bright_miss_model", Estimate::exact(d.bright_miss()));
    res.set(
        "dark_false_positive_model",
        Estimate::exact(d.dark_false_positive()),
    );
    let mut table = Table::new(&["photons", "f1", "f2"]);
    let (f1, f2) = match cfg.mode {
        Mode::Analytic => {
            let f1 = poisson_histogram(d.dark_mean());
            let f2 = poisson_histogram(d.mean_signal_photons);
            res.set("fidelity", Estimate::exact(d.fidelity()));
            res.settings.push(SettingResult {
                setting: "F1".into(),
                probabilities: f1.clone(),
                counts: None,
            });
            res.settings.push(SettingResult {
                setting: "F2".into(),
                probabilities: f2.clone(),
                counts: None,
            });
            (f1, f2)
        }
        Mode::MonteCarlo => {
            let n = cfg.trials as f64;
            let dark = sample_level(cfg, HyperfineLevel::F1);
            let bright = sample_level(cfg, HyperfineLevel::F2);
            let p_dark_ok = 1.0 - dark.bright as f64 / n;
            let p_bright_ok = bright.bright as f64 / n;
            let se = 0.5
                * (p_dark_ok * (1.0 - p_dark_ok) / n + p_bright_ok * (1.0 - p_bright_ok) / n)
                    .sqrt();
            res.set(
                "fidelity",
                Estimate::with_error(0.5 * (p_dark_ok + p_bright_ok), se),
            );
            let mut freqs = Vec::new();
            for (label, s) in [("F1", dark), ("F2", bright)] {
                let p: Vec<f64> = s.histogram.iter().map(|&k| k as f64 / n).collect();
                freqs.push(p.clone());
                res.settings.push(SettingResult {
                    setting: label.into(),
                    probabilities: p,
                    counts: Some(s.histogram),
                });
            }
            let f2 = freqs.pop().expect("two levels");
            (freqs.pop().expect("two levels"), f2)
        }
    };
    for k in 0..HISTOGRAM_BINS {
        table.rows.push(vec![k as f64, f1[k], f2[k]]);
    }
    res.tables.insert("histogram".into(), table);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn histogram_is_normalized() {
        for m in [0.0, 0.003, 5.52, 40.0] {
            assert_abs_diff_eq!(
                poisson_histogram(m).iter().sum::<f64>(),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn perfect_detector_has_unit_fidelity() {
        let mut cfg = RunConfig::ideal();
        cfg.mode = Mode::MonteCarlo;
        cfg.trials = 20_000;
        let res = run_state_detection(&cfg).unwrap();
        assert_eq!(res.value("fidelity"), 1.0);
    }

    #[test]
    fn higher_threshold_is_worse_here() {
        let mut cfg = RunConfig::paper();
        let f1 = run_state_detection(&cfg).unwrap().value("fidelity");
        cfg.detection.threshold = 3;
        let f3 = run_state_detection(&cfg).unwrap().value("fidelity");
        assert!(f3 < f1);
    }
}

//! Run configuration, read from TOML.
//!
//! Frequencies are written in plain MHz, kHz or GHz with the unit in the
//! key name; conversion to angular units happens in [`CavityConfig::params`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cavity::{mhz_to_angular, CavityParams, LevelScheme, MirrorBudget};
use crate::error::{Error, Result};
use crate::pulse::{CoherentPulse, DetectionModel, ImperfectionConfig};
use crate::tomography::MleOptions;

/// Profile encoding the published parameters.
pub const PAPER_PROFILE: &str = include_str!("../profiles/paper.toml");
/// Profile with every imperfection switched off.
pub const IDEAL_PROFILE: &str = include_str!("../profiles/ideal.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact channel composition.
    #[default]
    Analytic,
    /// Shot-level trajectories.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub g_mhz: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    #[serde(default)]
    pub delta_c_mhz: f64,
    #[serde(default)]
    pub delta_a_mhz: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            g_mhz: 6.7,
            kappa_mhz: 2.5,
            gamma_mhz: 3.0,
            delta_c_mhz: 0.0,
            delta_a_mhz: 0.0,
        }
    }
}

impl CavityConfig {
    pub fn params(&self, mirrors: &MirrorBudget) -> CavityParams {
        CavityParams::from_mhz(self.g_mhz, self.kappa_mhz, self.gamma_mhz, mirrors).with_detuning(
            mhz_to_angular(self.delta_c_mhz),
            mhz_to_angular(self.delta_a_mhz),
        )
    }
}

/// Pulse parameters per protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSet {
    pub truth_table: CoherentPulse,
    pub bell: CoherentPulse,
    pub ghz: CoherentPulse,
    pub eraser: CoherentPulse,
}

impl Default for PulseSet {
    fn default() -> Self {
        Self {
            truth_table: CoherentPulse::new(0.3, 0.7),
            bell: CoherentPulse::new(0.07, 0.7),
            ghz: CoherentPulse::new(0.07, 0.7),
            eraser: CoherentPulse::new(0.07, 0.7),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseyConfig {
    /// Free-precession time between the two π/2 pulses.
    pub separation_us: f64,
    pub pulse_duration_us: f64,
    /// Detuning grid spans `±span_khz`.
    pub span_khz: f64,
    pub points: usize,
    /// Phase of the second pulse relative to the first, radians.
    #[serde(default)]
    pub phase2: f64,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        Self {
            separation_us: 7.5,
            pulse_duration_us: 1.7,
            span_khz: 200.0,
            points: 81,
            phase2: 0.0,
        }
    }
}

impl RamseyConfig {
    /// Evenly spaced detunings in kHz.
    pub fn grid_khz(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.0];
        }
        let step = 2.0 * self.span_khz / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| -self.span_khz + step * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    #[serde(default)]
    pub mle: MleOptions,
    /// Bootstrap replicas for Monte-Carlo error bars.
    pub resamples: usize,
    pub roundtrip_states: usize,
    pub roundtrip_shots: u64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            mle: MleOptions::default(),
            resamples: 100,
            roundtrip_states: 50,
            roundtrip_shots: 10_000,
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Trials per setting (protocols), per prepared state (detection) or
    /// per grid point (Ramsey).
    pub trials: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Share of attempts passing optical-pumping preselection.
    #[serde(default = "default_preselection")]
    pub preselection_pass: f64,
    #[serde(default)]
    pub cavity: CavityConfig,
    #[serde(default)]
    pub mirrors: MirrorBudget,
    #[serde(default)]
    pub level_scheme: LevelScheme,
    #[serde(default)]
    pub imperfections: ImperfectionConfig,
    #[serde(default)]
    pub detection: DetectionModel,
    #[serde(default)]
    pub pulses: PulseSet,
    #[serde(default)]
    pub ramsey: RamseyConfig,
    #[serde(default)]
    pub tomography: TomographyConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_preselection() -> f64 {
    0.5
}

fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            path: format!("{section}.{name}"),
            reason,
        },
        other => other,
    }
}

impl RunConfig {
    /// The bundled profile with the published parameters.
    pub fn paper() -> Self {
        Self::from_toml_str(PAPER_PROFILE).expect("bundled profile is valid")
    }

    pub fn ideal() -> Self {
        Self::from_toml_str(IDEAL_PROFILE).expect("bundled profile is valid")
    }

    /// Resolves a bundled profile name.
    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "paper" | "paper.defaults" => Some(Self::paper()),
            "ideal" => Some(Self::ideal()),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            reason: e.message().to_string(),
        })?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let reason = inner.message().to_string();
            // a missing field is reported at its parent; name the field itself
            let path = match reason
                .strip_prefix("missing field `")
                .and_then(|r| r.strip_suffix('`'))
            {
                Some(field) if path == "." || path.is_empty() => field.to_string(),
                Some(field) => format!("{path}.{field}"),
                None => path,
            };
            Error::Config { path, reason }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config {
                path: "trials".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !(self.preselection_pass > 0.0 && self.preselection_pass <= 1.0) {
            return Err(Error::Config {
                path: "preselection_pass".into(),
                reason: format!("{} is outside (0, 1]", self.preselection_pass),
            });
        }
        self.mirrors
            .validate()
            .map_err(|e| in_section("mirrors", e))?;
        self.cavity
            .params(&self.mirrors)
            .validate()
            .map_err(|e| in_section("cavity", e))?;
        self.level_scheme
            .validate()
            .map_err(|e| in_section("level_scheme", e))?;
        self.imperfections
            .validate()
            .map_err(|e| in_section("imperfections", e))?;
        self.detection
            .validate()
            .map_err(|e| in_section("detection", e))?;
        for (name, p) in [
            ("truth_table", &self.pulses.truth_table),
            ("bell", &self.pulses.bell),
            ("ghz", &self.pulses.ghz),
            ("eraser", &self.pulses.eraser),
        ] {
            p.validate()
                .map_err(|e| in_section(&format!("pulses.{name}"), e))?;
        }
        let r = &self.ramsey;
        if !(r.separation_us.is_finite() && r.separation_us > 0.0) {
            return Err(Error::Config {
                path: "ramsey.separation_us".into(),
                reason: "must be positive".into(),
            });
        }
        if r.points == 0 {
            return Err(Error::Config {
                path: "ramsey.points".into(),
                reason: "grid must be nonempty".into(),
            });
        }
        if !(r.span_khz.is_finite() && r.span_khz >= 0.0) {
            return Err(Error::Config {
                path: "ramsey.span_khz".into(),
                reason: "must be >= 0".into(),
            });
        }
        self.tomography
            .mle
            .validate()
            .map_err(|e| in_section("tomography.mle", e))?;
        if self.tomography.resamples < 2 {
            return Err(Error::Config {
                path: "tomography.resamples".into(),
                reason: "at least 2 replicas are needed".into(),
            });
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        [
            &self.pulses.truth_table,
            &self.pulses.bell,
            &self.pulses.ghz,
            &self.pulses.eraser,
        ]
        .iter()
        .flat_map(|p| p.warnings())
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn paper_profile_loads() {
        let cfg = RunConfig::paper();
        let p = cfg.cavity.params(&cfg.mirrors);
        assert_abs_diff_eq!(p.g, 2.0 * std::f64::consts::PI * 6.7, epsilon = 1e-12);
        assert_abs_diff_eq!(p.kappa_in / p.kappa, 95.0 / 103.0, epsilon = 1e-12);
        assert_eq!(cfg.imperfections.mode_overlap, 0.92);
        assert_eq!(cfg.pulses.truth_table.mean_photons, 0.3);
        assert_eq!(cfg.pulses.bell.mean_photons, 0.07);
    }

    #[test]
    fn missing_seed_names_field() {
        let text = PAPER_PROFILE.replace("seed =", "# seed =");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "seed"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_overlap() {
        let text = PAPER_PROFILE.replace("mode_overlap = 0.92", "mode_overlap = 1.3");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, reason }) => {
                assert_eq!(path, "imperfections.mode_overlap");
                assert!(reason.contains("outside"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = PAPER_PROFILE.replace("[imperfections]", "[imperfections]\nbogus = 1");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, reason }) => {
                assert!(path.starts_with("imperfections"), "{path}");
                assert!(reason.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        for cfg in [RunConfig::paper(), RunConfig::ideal()] {
            let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn ramsey_grid() {
        let g = RamseyConfig::default().grid_khz();
        assert_eq!(g.len(), 81);
        assert_abs_diff_eq!(g[40], 0.0, epsilon = 1e-12);
    }
}

//! End-to-end experiment drivers.
//!
//! Each driver returns a [`ProtocolResult`] holding the per-setting
//! statistics, the derived figures of merit and a snapshot of the
//! configuration that produced them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::qlin::DensityMatrix;

pub mod budget;
pub mod detection;
pub mod engine;
pub mod entangle;
pub mod ramsey;
pub mod roundtrip;

pub use budget::run_loss_budget;
pub use detection::run_state_detection;
pub use engine::{GateModel, Scenario};
pub use entangle::{run_bell, run_eraser, run_ghz, run_truth_table, TRUTH_TABLE_INPUTS};
pub use ramsey::{fit_fringe, run_ramsey, FringeFit};
pub use roundtrip::run_tomo_roundtrip;

/// A value with an optional Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: None,
        }
    }

    pub fn with_error(value: f64, std_error: f64) -> Self {
        Self {
            value,
            std_error: Some(std_error),
        }
    }
}

/// Outcome statistics of one measurement setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    /// Basis labels, prefixed by a condition where one applies
    /// (e.g. `"↑x↓/ZX"` or `"atom=1/XY"`).
    pub setting: String,
    pub probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<Vec<u64>>,
}

/// A table of numbers for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Optional label per row.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub row_labels: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            row_labels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub label: String,
    pub mode: Mode,
    pub seed: u64,
    pub trials: u64,
    pub settings: Vec<SettingResult>,
    pub derived: BTreeMap<String, Estimate>,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub density_matrices: BTreeMap<String, DensityMatrix>,
    #[serde(default)]
    pub tables: BTreeMap<String, Table>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub config: RunConfig,
}

impl ProtocolResult {
    pub fn new(label: &str, cfg: &RunConfig) -> Self {
        Self {
            label: label.to_string(),
            mode: cfg.mode,
            seed: cfg.seed,
            trials: cfg.trials,
            settings: Vec::new(),
            derived: BTreeMap::new(),
            flags: BTreeMap::new(),
            density_matrices: BTreeMap::new(),
            tables: BTreeMap::new(),
            warnings: cfg.warnings(),
            config: cfg.clone(),
        }
    }

    pub fn set(&mut self, key: &str, e: Estimate) {
        self.derived.insert(key.to_string(), e);
    }

    /// Value of a derived quantity, panicking if absent.
    pub fn value(&self, key: &str) -> f64 {
        match self.derived.get(key) {
            Some(e) => e.value,
            None => panic!("no derived quantity `{key}` in {} result", self.label),
        }
    }

    pub fn std_error(&self, key: &str) -> Option<f64> {
        self.derived.get(key).and_then(|e| e.std_error)
    }
}

//! Scenario files: one JSON document per scenario.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use threebody::dynamics::IntegratorSpec;
use threebody::reference::ClosedForm;
use threebody::{MassTriple, PotentialSpec, Representation};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Initial data, in the scenario's representation or as squared distances
/// and their rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Coordinates and conjugate momenta.
    Phase { q: Vec<f64>, p: Vec<f64> },
    /// Coordinates and their time derivatives.
    Velocities { q: Vec<f64>, qdot: Vec<f64> },
    /// `(rho12, rho23, rho31)` and `d rho / dt`; the only form the oracle
    /// accepts.
    RhoRates { rho: [f64; 3], rho_dot: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    /// `max_t |q0(t) - form(t)|` over the output samples.
    ClosedForm { form: ClosedForm, tolerance: f64 },
    /// Relative energy drift.
    EnergyDrift { tolerance: f64 },
    /// `sup_t |p_index(t)|`.
    InvariantManifold { index: usize, tolerance: f64 },
    /// Oracle runs in each listed dimension and the squared-distance flow,
    /// compared pairwise by `max_t |d rho(t)|`.
    CrossRepresentation {
        dimensions: Vec<usize>,
        tolerance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem of `<stem>.csv` and `<stem>.json`.
    pub stem: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub representation: Representation,
    pub masses: MassTriple,
    pub potential: PotentialSpec,
    pub initial: InitialState,
    pub t_span: (f64, f64),
    /// Evenly spaced output samples over `t_span`; every accepted step when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    /// Momentum components recorded as `|p_i|` monitor columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monitors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckSpec>,
    pub output: OutputSpec,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario configs serialize")
    }

    /// Structural checks that need no integration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let (t0, t1) = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return bad(format!(
                "t_span ({t0}, {t1}) is not an increasing finite interval"
            ));
        }
        if self.samples.is_some_and(|n| n < 2) {
            return bad("samples must be at least 2".into());
        }
        if self.output.stem.is_empty() || self.output.stem.contains(['/', '\\']) {
            return bad(format!(
                "output stem {:?} is not a file name",
                self.output.stem
            ));
        }
        let n = self.representation.dim();
        if let Some(&i) = self.monitors.iter().find(|&&i| i >= n) {
            return bad(format!(
                "monitor index {i} out of range for {:?}",
                self.representation
            ));
        }
        match &self.initial {
            InitialState::Phase { q, p: v } | InitialState::Velocities { q, qdot: v }
                if q.len() != n || v.len() != n =>
            {
                return bad(format!(
                    "{:?} initial data needs {n} coordinates and {n} rates",
                    self.representation
                ));
            }
            _ => {}
        }
        for c in &self.checks {
            match c {
                CheckSpec::InvariantManifold { index, .. } if *index >= n => {
                    return bad(format!("invariant manifold index {index} out of range"));
                }
                CheckSpec::CrossRepresentation { dimensions, .. } => {
                    if dimensions.iter().any(|&d| d < 2) {
                        return bad("oracle dimensions must be at least 2".into());
                    }
                    if !matches!(self.initial, InitialState::RhoRates { .. }) {
                        return bad(
                            "cross-representation checks need rho_rates initial data".into()
                        );
                    }
                    if self.samples.is_none() {
                        return bad(
                            "cross-representation checks need an output grid (samples)".into()
                        );
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

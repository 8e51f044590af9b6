//! Experiment configuration: flat sectioned key-value files (TOML grammar),
//! one section per module plus a common `[experiment]` header.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Top-level configuration. Unknown keys are rejected so typos surface as
/// configuration errors naming the offending field.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotor: Option<RotorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillator: Option<OscillatorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glauber: Option<GlauberSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    /// One of: rotor-echo, rotor-classical, osc-correlation, osc-fgr,
    /// osc-ivr, glauber-populations, fit.
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    /// Exponential-fit window (t_min, t_max) applied to the primary series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RotorSection {
    /// Hilbert-space dimension; the effective Planck constant is 2π/n.
    pub n: usize,
    pub kick_strength: f64,
    /// Perturbation in units of the effective Planck constant.
    pub epsilon_over_hbar: f64,
    /// Number of packets in the incoherent mixture.
    pub members: usize,
    /// Number of kicks.
    pub t_max: usize,
    /// Initial phase-space region [theta_min, theta_max, p_min, p_max].
    pub region: [f64; 4],
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    pub kick_strength: f64,
    /// Winding number of the angular observable e^{iγθ}.
    pub gamma: f64,
    pub trajectories: usize,
    pub t_max: usize,
    pub region: [f64; 4],
    /// Fit window for the correlation series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    pub omega0: f64,
    /// "kicked" (unit-period impulses) or "smooth" (multimode cosine drive).
    pub drive: String,
    pub g0: f64,
    /// Number of drive harmonics (smooth drive only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    /// Drive phases, one per harmonic (smooth drive only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    /// Modulus of the mixture's central amplitude (action I₀ = center²).
    pub center: f64,
    /// Mean squared radial displacement of the mixture.
    pub delta: f64,
    pub samples: usize,
    #[serde(default)]
    pub burn_in: f64,
    pub t_max: f64,
    /// Integration step (smooth drive); ignored for the kicked drive.
    #[serde(default)]
    pub dt: f64,
    /// Perturbation strength (osc-fgr, osc-ivr).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Effective Planck constant of the quantum-cell sampler (osc-ivr).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GlauberSection {
    /// "gaussian", "ring", "thermal", or "tabulated".
    pub weight: String,
    pub hbar: f64,
    /// Number of occupation levels to report.
    pub n_max: usize,
    /// Mean action of the Gaussian weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Ring center and width.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Temperature and linear frequency of the thermal weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    /// Two-column text file with a tabulated weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Existing CSV (header t,value,stderr) to re-fit.
    pub csv: PathBuf,
}

/// Configuration-stage failure; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

pub const KINDS: [&str; 7] = [
    "rotor-echo",
    "rotor-classical",
    "osc-correlation",
    "osc-fgr",
    "osc-ivr",
    "glauber-populations",
    "fit",
];

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let config: Config =
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let kind = self.experiment.kind.as_str();
        if !KINDS.contains(&kind) {
            return Err(ConfigError(format!(
                "experiment.kind: unknown kind {kind:?}; expected one of {}",
                KINDS.join(", ")
            )));
        }
        let need = |present: bool, section: &str| -> Result<(), ConfigError> {
            if present {
                Ok(())
            } else {
                Err(ConfigError(format!(
                    "[{section}] section is required for kind {kind:?}"
                )))
            }
        };
        match kind {
            "rotor-echo" => need(self.rotor.is_some(), "rotor")?,
            "rotor-classical" => need(self.classical.is_some(), "classical")?,
            "osc-correlation" | "osc-fgr" | "osc-ivr" => {
                need(self.oscillator.is_some(), "oscillator")?
            }
            "glauber-populations" => need(self.glauber.is_some(), "glauber")?,
            "fit" => {
                need(self.fit.is_some(), "fit")?;
                if self.experiment.fit_window.is_none() {
                    return Err(ConfigError(
                        "experiment.fit_window is required for kind \"fit\"".into(),
                    ));
                }
            }
            _ => unreachable!(),
        }
        if let Some(w) = self.experiment.fit_window {
            if !(w[0] < w[1]) {
                return Err(ConfigError(format!(
                    "experiment.fit_window: need t_min < t_max, got [{}, {}]",
                    w[0], w[1]
                )));
            }
        }
        if let Some(osc) = &self.oscillator {
            match osc.drive.as_str() {
                "kicked" => {}
                "smooth" => {
                    if osc.harmonics.is_none() {
                        return Err(ConfigError(
                            "oscillator.harmonics is required for the smooth drive".into(),
                        ));
                    }
                    if osc.dt <= 0.0 {
                        return Err(ConfigError(
                            "oscillator.dt must be positive for the smooth drive".into(),
                        ));
                    }
                }
                other => {
                    return Err(ConfigError(format!(
                        "oscillator.drive: unknown drive {other:?}; expected \"kicked\" or \"smooth\""
                    )))
                }
            }
        }
        if let Some(g) = &self.glauber {
            let missing = |field: &str| {
                ConfigError(format!(
                    "glauber.{field} is required for weight {:?}",
                    g.weight
                ))
            };
            match g.weight.as_str() {
                "gaussian" => g.delta.map(|_| ()).ok_or_else(|| missing("delta"))?,
                "ring" => {
                    g.i0.ok_or_else(|| missing("i0"))?;
                    g.width.map(|_| ()).ok_or_else(|| missing("width"))?
                }
                "thermal" => {
                    g.temperature.ok_or_else(|| missing("temperature"))?;
                    g.omega0.map(|_| ()).ok_or_else(|| missing("omega0"))?
                }
                "tabulated" => g.path.as_ref().map(|_| ()).ok_or_else(|| missing("path"))?,
                other => {
                    return Err(ConfigError(format!(
                        "glauber.weight: unknown weight {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }
}

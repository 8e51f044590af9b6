//! CSV and JSON persistence with a stable, reproducible byte layout.

use crate::config::Config;
use echo_lab::series::{DecaySeries, FitResult};
use echo_lab::{fmt_e, Result};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Write a series as `t,value,stderr` rows with `%.12e` formatting.
pub fn write_csv(path: &Path, series: &DecaySeries) -> Result<()> {
    let mut out = String::with_capacity(64 * series.times.len() + 16);
    out.push_str("t,value,stderr\n");
    for i in 0..series.times.len() {
        out.push_str(&fmt_e(series.times[i]));
        out.push(',');
        out.push_str(&fmt_e(series.values[i]));
        out.push(',');
        out.push_str(&fmt_e(series.stderrs[i]));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a `t,value,stderr` CSV back into a series.
pub fn read_csv(path: &Path) -> Result<DecaySeries> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "t,value,stderr" {
        return Err(echo_lab::EchoError::Parse(format!(
            "{}: expected header \"t,value,stderr\", found {header:?}",
            path.display()
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut stderrs = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| {
                    echo_lab::EchoError::Parse(format!(
                        "{} row {}: missing {name} column",
                        path.display(),
                        row + 2
                    ))
                })?
                .trim()
                .parse()
                .map_err(|e| {
                    echo_lab::EchoError::Parse(format!(
                        "{} row {}: {name}: {e}",
                        path.display(),
                        row + 2
                    ))
                })
        };
        times.push(next("t")?);
        values.push(next("value")?);
        stderrs.push(next("stderr")?);
    }
    Ok(DecaySeries::new(times, values).with_stderrs(stderrs))
}

/// Fit block of the JSON summary.
#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub window: [f64; 2],
    pub rate: f64,
    pub rate_stderr: f64,
    pub intercept: f64,
    pub residual: f64,
}

impl From<FitResult> for FitSummary {
    fn from(fit: FitResult) -> Self {
        Self {
            window: [fit.window.0, fit.window.1],
            rate: fit.rate,
            rate_stderr: fit.rate_stderr,
            intercept: fit.intercept,
            residual: fit.residual,
        }
    }
}

/// One emitted series: file name, row count, and derived numbers.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesSummary {
    pub name: String,
    pub file: String,
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    /// Late-time average, reported for saturating fidelity series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau: Option<f64>,
}

/// Rate comparison between the coherent quantum decay and the classical
/// correlation decay.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RateComparison {
    pub quantum_rate: f64,
    pub classical_rate: f64,
    pub ratio: f64,
    /// Set when the two rates agree within 20 %.
    pub follows_classical: bool,
    /// ln(K/2), the chaotic stretching rate of the map.
    pub lyapunov_reference: f64,
    pub quantum_over_lyapunov: f64,
}

/// Build the comparison report from the two fitted rates.
pub fn compare_rates(quantum_rate: f64, classical_rate: f64, kick_strength: f64) -> RateComparison {
    let ratio = quantum_rate / classical_rate;
    let lyapunov_reference = (kick_strength / 2.0).ln();
    RateComparison {
        quantum_rate,
        classical_rate,
        ratio,
        follows_classical: (ratio - 1.0).abs() <= 0.2,
        lyapunov_reference,
        quantum_over_lyapunov: quantum_rate / lyapunov_reference,
    }
}

/// JSON summary; field order here fixes the key order in the file.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub code_version: String,
    pub experiment: String,
    pub seed: u64,
    pub config: Config,
    pub series: Vec<SeriesSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<RateComparison>,
    /// Scalar results that do not belong to a single series.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scalars: Vec<Scalar>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Scalar {
    pub name: String,
    pub value: f64,
}

impl Summary {
    pub fn new(config: &Config, seed: u64) -> Self {
        Self {
            schema_version: 1,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: config.experiment.kind.clone(),
            seed,
            config: config.clone(),
            series: Vec::new(),
            comparison: None,
            scalars: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| echo_lab::EchoError::Parse(format!("summary serialization: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

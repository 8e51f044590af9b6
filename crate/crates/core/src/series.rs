//! Time series of decaying observables and exponential-rate fitting.

use crate::error::{EchoError, Result};

/// Result of a least-squares exponential fit `value ≈ exp(-(rate·t) + const)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    /// Decay rate per unit time (slope of -ln value vs t).
    pub rate: f64,
    /// Intercept of the -ln value fit at t = 0.
    pub intercept: f64,
    /// Standard error of the rate from the fit's residual variance.
    pub rate_stderr: f64,
    /// RMS of log-space residuals divided by the log-range spanned inside the
    /// window; dimensionless measure of how exponential the decay is.
    pub residual: f64,
    /// Window (t_min, t_max) actually used.
    pub window: (f64, f64),
}

/// Time-indexed record of a fidelity or correlation observable.
#[derive(Clone, Debug)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-point statistical error (zeros for deterministic series).
    pub stderrs: Vec<f64>,
    /// Fit attached by [`DecaySeries::fit`], if any.
    pub fitted: Option<FitResult>,
}

impl DecaySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        let n = values.len();
        assert_eq!(times.len(), n, "times/values length mismatch");
        Self {
            times,
            values,
            stderrs: vec![0.0; n],
            fitted: None,
        }
    }

    pub fn with_stderrs(mut self, stderrs: Vec<f64>) -> Self {
        assert_eq!(stderrs.len(), self.values.len());
        self.stderrs = stderrs;
        self
    }

    /// Value at the time closest to `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &ti) in self.times.iter().enumerate() {
            let d = (ti - t).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        self.values[best]
    }

    /// Fit an exponential rate over `window` and attach the result.
    pub fn fit(&mut self, window: (f64, f64)) -> Result<FitResult> {
        let fit = fit_decay_rate(&self.times, &self.values, window)?;
        self.fitted = Some(fit);
        Ok(fit)
    }

    /// Fitted rate, panicking if no fit was attached.
    pub fn rate(&self) -> f64 {
        self.fitted.expect("no fit attached").rate
    }
}

/// Least-squares slope of `-ln(value)` vs `t` over `window` (inclusive).
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(EchoError::InvalidParameter(format!(
            "fit window ({t0}, {t1}) is empty"
        )));
    }
    let eps = 1e-9 * (t1 - t0);
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < t0 - eps || t > t1 + eps {
            continue;
        }
        if !(v > 0.0) {
            return Err(EchoError::FitDomain(format!(
                "non-positive value {v} at t = {t} inside fit window"
            )));
        }
        ts.push(t);
        ys.push(-v.ln());
    }
    let n = ts.len();
    if n < 3 {
        return Err(EchoError::InsufficientData(format!(
            "fit window ({t0}, {t1}) contains {n} points, need at least 3"
        )));
    }
    let nf = n as f64;
    let tbar = ts.iter().sum::<f64>() / nf;
    let ybar = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(&ys) {
        sxx += (t - tbar) * (t - tbar);
        sxy += (t - tbar) * (y - ybar);
    }
    let rate = sxy / sxx;
    let intercept = ybar - rate * tbar;
    let mut ss_res = 0.0;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (&t, &y) in ts.iter().zip(&ys) {
        let r = y - (intercept + rate * t);
        ss_res += r * r;
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let rate_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let rms = (ss_res / nf).sqrt();
    let span = ymax - ymin;
    let residual = if span > 1e-12 { rms / span } else { rms };
    Ok(FitResult {
        rate,
        intercept,
        rate_stderr,
        residual,
        window,
    })
}

//! Classical standard map: ensembles, Lyapunov exponent, and the angular
//! correlation function that the coherent fidelity of a wide mixture tracks.
//!
//! Map convention (kick-then-drift, force +K sinθ):
//!   p' = p + K sinθ  wrapped into [-π, π),
//!   θ' = θ + p'      wrapped into [0, 2π).

use crate::error::{EchoError, Result};
use crate::hilbert::Region;
use crate::rng::{stream, Kahan};
use crate::series::DecaySeries;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

/// One application of the standard map.
pub fn standard_map_step(theta: f64, p: f64, kick_strength: f64) -> (f64, f64) {
    let p_next = wrap_p(p + kick_strength * theta.sin());
    let theta_next = (theta + p_next).rem_euclid(TAU);
    (theta_next, p_next)
}

fn wrap_p(p: f64) -> f64 {
    (p + PI).rem_euclid(TAU) - PI
}

/// Ensemble of phase-space points in the fundamental domain.
#[derive(Clone, Debug)]
pub struct ClassicalEnsemble {
    pub thetas: Vec<f64>,
    pub ps: Vec<f64>,
    pub seed: u64,
}

impl ClassicalEnsemble {
    /// `n` points uniform in `region` (fractional coordinates), one random
    /// stream per point.
    pub fn uniform_in_region(region: &Region, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(EchoError::EmptyEnsemble(
                "ensemble must contain at least one trajectory".into(),
            ));
        }
        let mut thetas = Vec::with_capacity(n);
        let mut ps = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = stream(seed, i as u64);
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            thetas.push(TAU * (region.theta_min + (region.theta_max - region.theta_min) * u));
            ps.push(wrap_p(TAU * (region.p_min + (region.p_max - region.p_min) * v)));
        }
        Ok(Self { thetas, ps, seed })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Lyapunov estimate with its ensemble statistical error.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub stderr: f64,
    /// False when the estimate sits below the 0.01 chaos threshold.
    pub chaotic: bool,
}

/// Maximal Lyapunov exponent of the standard map from the tangent map,
/// renormalizing the tangent vector every 10 steps to avoid overflow.
pub fn lyapunov_exponent(
    kick_strength: f64,
    n_traj: usize,
    t_max: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if kick_strength < 0.0 {
        return Err(EchoError::InvalidParameter(
            "kick strength must be non-negative".into(),
        ));
    }
    if n_traj == 0 {
        return Err(EchoError::EmptyEnsemble("no trajectories".into()));
    }
    if t_max < 100 {
        return Err(EchoError::InvalidParameter(format!(
            "need at least 100 steps for a Lyapunov estimate, got {t_max}"
        )));
    }
    let per_traj: Vec<f64> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let mut theta: f64 = TAU * rng.gen::<f64>();
            let mut p: f64 = wrap_p(TAU * rng.gen::<f64>() - PI);
            let mut v = (1.0_f64, 0.0_f64);
            let mut log_growth = 0.0;
            for t in 0..t_max {
                // Tangent map of (θ,p) -> (θ+p', p+K sinθ): dp' = dp + K cosθ dθ.
                let c = kick_strength * theta.cos();
                let dp = v.1 + c * v.0;
                let dtheta = v.0 + dp;
                v = (dtheta, dp);
                let next = standard_map_step(theta, p, kick_strength);
                theta = next.0;
                p = next.1;
                if (t + 1) % 10 == 0 {
                    let norm = (v.0 * v.0 + v.1 * v.1).sqrt();
                    log_growth += norm.ln();
                    v = (v.0 / norm, v.1 / norm);
                }
            }
            let norm = (v.0 * v.0 + v.1 * v.1).sqrt();
            if norm > 0.0 && t_max % 10 != 0 {
                log_growth += norm.ln();
            }
            log_growth / t_max as f64
        })
        .collect();
    let n = n_traj as f64;
    let mean = kahan_mean(&per_traj);
    let var = per_traj
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / n.max(2.0);
    let stderr = (var / n).sqrt();
    Ok(LyapunovEstimate {
        value: mean,
        stderr,
        chaotic: mean >= 0.01,
    })
}

fn kahan_mean(xs: &[f64]) -> f64 {
    let mut acc = Kahan::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value() / xs.len() as f64
}

/// Angular correlation C(t) = |⟨exp(iγ[θ(t) - θ(0)])⟩|² over the ensemble.
///
/// The angle difference is accumulated on the lifted (unwrapped) angle: each
/// step adds the wrapped momentum p' to the lift, so θ(t) - θ(0) = Σ p'.
pub fn angular_correlation(
    ensemble: &ClassicalEnsemble,
    gamma: f64,
    kick_strength: f64,
    t_max: usize,
) -> Result<DecaySeries> {
    if ensemble.is_empty() {
        return Err(EchoError::EmptyEnsemble("empty ensemble".into()));
    }
    let n = ensemble.len();
    // phases[i][t] = γ·(lifted angle difference) for trajectory i at time t.
    let phases: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut theta = ensemble.thetas[i];
            let mut p = ensemble.ps[i];
            let mut lift = 0.0;
            let mut row = Vec::with_capacity(t_max + 1);
            row.push(0.0);
            for _ in 0..t_max {
                let next = standard_map_step(theta, p, kick_strength);
                theta = next.0;
                p = next.1;
                lift += p;
                row.push(gamma * lift);
            }
            row
        })
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut values = Vec::with_capacity(t_max + 1);
    let mut stderrs = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let mut re = Kahan::new();
        let mut im = Kahan::new();
        for row in &phases {
            re.add(row[t].cos());
            im.add(row[t].sin());
        }
        let mean = Complex64::new(re.value() * inv_n, im.value() * inv_n);
        values.push(mean.norm_sqr());
        // Var of each component of e^{iφ} is at most 1; the dominant error of
        // |mean|² is 2|mean|·SE(component) plus the O(1/n) floor.
        let comp_se = inv_n.sqrt();
        stderrs.push(2.0 * mean.norm() * comp_se + inv_n);
    }
    Ok(DecaySeries::new(
        (0..=t_max).map(|t| t as f64).collect(),
        values,
    )
    .with_stderrs(stderrs))
}

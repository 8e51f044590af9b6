//! Driven quartic nonlinear oscillator, treated classically in the
//! coherent-state plane α = √I e^{-iθ}.
//!
//! The equation of motion is dα/dt = -i[(ω₀ + 2|α|²)α - g(t)] with drive
//! period 1. Two drive shapes are supported: periodic δ-kicks of strength g₀
//! (exactly integrable between kicks) and a smooth multimode force
//! g(t) = Σ_j g_j cos(2πjt + φ_j) integrated with fixed-step RK4.
//!
//! Alongside α every trajectory accumulates the phase integral
//! φ(t) = ∫₀ᵗ [ω₀ + 2I(τ)] dτ, the central observable of all fidelity
//! estimators in this module. Note ∫₀ᵗ I dτ = (φ(t) - ω₀t)/2 identically.

use crate::error::{EchoError, Result};
use crate::rng::{stream, Kahan};
use crate::series::DecaySeries;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Drive shape; the period is 1 by construction.
#[derive(Clone, Debug, PartialEq)]
pub enum Drive {
    /// δ-kicks of strength g₀ at integer times.
    Kicked { g0: f64 },
    /// g(t) = Σ_j amplitudes[j-1]·cos(2πjt + phases[j-1]).
    Smooth {
        amplitudes: Vec<f64>,
        phases: Vec<f64>,
    },
}

impl Drive {
    /// Smooth drive with equal amplitude g₀ on the first `harmonics` modes.
    pub fn smooth_equal(g0: f64, harmonics: usize, phases: Vec<f64>) -> Self {
        Drive::Smooth {
            amplitudes: vec![g0; harmonics],
            phases,
        }
    }
}

/// Oscillator parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OscParams {
    pub omega0: f64,
    pub drive: Drive,
}

impl OscParams {
    fn drive_value(&self, t: f64) -> f64 {
        match &self.drive {
            Drive::Kicked { .. } => 0.0,
            Drive::Smooth { amplitudes, phases } => {
                let mut g = 0.0;
                for (j, (a, ph)) in amplitudes.iter().zip(phases).enumerate() {
                    g += a * (TAU * (j + 1) as f64 * t + ph).cos();
                }
                g
            }
        }
    }
}

/// Classical state: coherent amplitude and accumulated phase integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscState {
    pub alpha: Complex64,
    pub phase_integral: f64,
}

impl OscState {
    pub fn new(alpha: Complex64) -> Self {
        Self {
            alpha,
            phase_integral: 0.0,
        }
    }

    pub fn action(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

/// Recorded classical orbit.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub alphas: Vec<Complex64>,
    pub actions: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Trajectory {
    fn push(&mut self, t: f64, s: &OscState) {
        self.times.push(t);
        self.alphas.push(s.alpha);
        self.actions.push(s.action());
        self.phases.push(s.phase_integral);
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            alphas: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            phases: Vec::with_capacity(n),
        }
    }
}

/// ∫₀ᵗ I dτ at every recorded time, from the phase integral identity.
pub fn action_integrals(traj: &Trajectory, omega0: f64) -> Vec<f64> {
    traj.times
        .iter()
        .zip(&traj.phases)
        .map(|(&t, &phi)| (phi - omega0 * t) / 2.0)
        .collect()
}

/// Exact free nonlinear rotation over `tau`: I is conserved, the angle
/// advances at rate ω₀ + 2I, and φ grows by that rate times τ.
fn rotate(state: &mut OscState, omega0: f64, tau: f64) {
    let rate = omega0 + 2.0 * state.action();
    state.alpha *= Complex64::from_polar(1.0, -rate * tau);
    state.phase_integral += rate * tau;
}

fn kick(state: &mut OscState, g0: f64) {
    state.alpha += Complex64::new(0.0, g0);
}

fn rk4_step(state: &mut OscState, params: &OscParams, t: f64, dt: f64) {
    let rhs = |t: f64, a: Complex64| -> (Complex64, f64) {
        let rate = params.omega0 + 2.0 * a.norm_sqr();
        let g = params.drive_value(t);
        (
            Complex64::new(0.0, -1.0) * (rate * a - Complex64::new(g, 0.0)),
            rate,
        )
    };
    let a = state.alpha;
    let (k1a, k1p) = rhs(t, a);
    let (k2a, k2p) = rhs(t + dt / 2.0, a + k1a * (dt / 2.0));
    let (k3a, k3p) = rhs(t + dt / 2.0, a + k2a * (dt / 2.0));
    let (k4a, k4p) = rhs(t + dt, a + k3a * dt);
    state.alpha = a + (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * (dt / 6.0);
    state.phase_integral += (k1p + 2.0 * k2p + 2.0 * k3p + k4p) * (dt / 6.0);
}

fn check_dt(params: &OscParams, dt: f64) -> Result<()> {
    if matches!(params.drive, Drive::Smooth { .. }) {
        if !(dt > 0.0) {
            return Err(EchoError::InvalidParameter(format!(
                "integrator step must be positive, got {dt}"
            )));
        }
        if dt > 0.01 + 1e-12 {
            return Err(EchoError::InvalidParameter(format!(
                "smooth drive requires dt <= 0.01, got {dt}"
            )));
        }
    }
    Ok(())
}

/// Evolve one state for time `t_final`, recording (α, I, φ) at integer times.
/// The kicked drive uses the exact between-kick rotation and ignores `dt`;
/// the smooth drive uses fixed-step RK4 with step `dt` (must be ≤ 0.01).
pub fn evolve_classical(
    state: &OscState,
    params: &OscParams,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let stride = match &params.drive {
        Drive::Kicked { .. } => 1,
        Drive::Smooth { .. } => {
            check_dt(params, dt)?;
            (1.0 / dt).round().max(1.0) as usize
        }
    };
    evolve_recorded(state, params, t_final, dt, stride)
}

/// Like [`evolve_classical`] but recording every `record_stride` integrator
/// steps (smooth drive) or every period (kicked drive, where the stride is
/// interpreted in periods).
pub fn evolve_recorded(
    state: &OscState,
    params: &OscParams,
    t_final: f64,
    dt: f64,
    record_stride: usize,
) -> Result<Trajectory> {
    if t_final < 0.0 {
        return Err(EchoError::InvalidParameter(
            "evolution time must be non-negative".into(),
        ));
    }
    let stride = record_stride.max(1);
    match &params.drive {
        Drive::Kicked { g0 } => {
            let periods = t_final.floor() as usize;
            let frac = t_final - periods as f64;
            let mut s = *state;
            let mut traj = Trajectory::with_capacity(periods / stride + 2);
            traj.push(0.0, &s);
            for m in 0..periods {
                kick(&mut s, *g0);
                rotate(&mut s, params.omega0, 1.0);
                if (m + 1) % stride == 0 {
                    traj.push((m + 1) as f64, &s);
                }
            }
            if frac > 1e-12 {
                kick(&mut s, *g0);
                rotate(&mut s, params.omega0, frac);
                traj.push(t_final, &s);
            } else if *traj.times.last().unwrap() < periods as f64 {
                traj.push(periods as f64, &s);
            }
            Ok(traj)
        }
        Drive::Smooth { .. } => {
            check_dt(params, dt)?;
            let n_steps = (t_final / dt).round() as usize;
            let mut s = *state;
            let mut traj = Trajectory::with_capacity(n_steps / stride + 2);
            traj.push(0.0, &s);
            for step in 0..n_steps {
                rk4_step(&mut s, params, step as f64 * dt, dt);
                if (step + 1) % stride == 0 {
                    traj.push((step + 1) as f64 * dt, &s);
                }
            }
            if *traj.times.last().unwrap() < (n_steps as f64 * dt) - 0.5 * dt {
                traj.push(n_steps as f64 * dt, &s);
            }
            Ok(traj)
        }
    }
}

/// Radial displacement law of a coherent mixture around its center.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialFamily {
    /// Isotropic complex Gaussian displacement with mean squared modulus Δ.
    Gaussian { delta: f64 },
    /// Displacement action uniform in [I₀ - width/2, I₀ + width/2] (clamped
    /// at 0), phase uniform.
    Ring { i0: f64, width: f64 },
    /// Displacement action drawn from a tabulated radial density p(I) ≥ 0 on
    /// `grid` (trapezoid-normalized), phase uniform. The thermal mixture is
    /// built by tabulating the matched radial weight of the `glauber` module.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// Incoherent isotropic mixture of coherent states around `center`.
#[derive(Clone, Debug)]
pub struct CoherentMixture {
    pub center: Complex64,
    pub family: RadialFamily,
    pub n_samples: usize,
    pub seed: u64,
    /// Equilibration time: each sample is evolved for this long under the
    /// same drive before measurement starts (phase integral reset to 0).
    pub burn_in: f64,
}

impl CoherentMixture {
    pub fn new(center: Complex64, family: RadialFamily, n_samples: usize, seed: u64) -> Self {
        Self {
            center,
            family,
            n_samples,
            seed,
            burn_in: 0.0,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Initial coherent amplitudes, one deterministic stream per sample.
    pub fn sample_alphas(&self) -> Result<Vec<Complex64>> {
        if self.n_samples == 0 {
            return Err(EchoError::EmptyEnsemble(
                "mixture needs at least one sample".into(),
            ));
        }
        let cdf = match &self.family {
            RadialFamily::Tabulated { grid, values } => Some(tabulated_cdf(grid, values)?),
            _ => None,
        };
        let mut alphas = Vec::with_capacity(self.n_samples);
        for i in 0..self.n_samples {
            let mut rng = stream(self.seed, i as u64);
            let delta = match &self.family {
                RadialFamily::Gaussian { delta } => {
                    let gx: f64 = StandardNormal.sample(&mut rng);
                    let gy: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(gx, gy) * (delta / 2.0).sqrt()
                }
                RadialFamily::Ring { i0, width } => {
                    let u: f64 = rng.gen();
                    let action = (i0 + width * (u - 0.5)).max(0.0);
                    let phase: f64 = TAU * rng.gen::<f64>();
                    Complex64::from_polar(action.sqrt(), phase)
                }
                RadialFamily::Tabulated { grid, .. } => {
                    let (cum, total) = cdf.as_ref().unwrap();
                    let u: f64 = rng.gen::<f64>() * total;
                    let action = invert_cdf(grid, cum, u);
                    let phase: f64 = TAU * rng.gen::<f64>();
                    Complex64::from_polar(action.sqrt(), phase)
                }
            };
            alphas.push(self.center + delta);
        }
        Ok(alphas)
    }
}

fn tabulated_cdf(grid: &[f64], values: &[f64]) -> Result<(Vec<f64>, f64)> {
    if grid.len() != values.len() || grid.len() < 2 {
        return Err(EchoError::InvalidParameter(
            "tabulated radial density needs matching grids of length >= 2".into(),
        ));
    }
    if values.iter().any(|&v| v < 0.0) {
        return Err(EchoError::InvalidParameter(
            "tabulated radial density must be non-negative".into(),
        ));
    }
    let mut cum = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        let panel = 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
        cum[i] = cum[i - 1] + panel;
    }
    let total = cum[grid.len() - 1];
    if total <= 0.0 {
        return Err(EchoError::InvalidParameter(
            "tabulated radial density integrates to zero".into(),
        ));
    }
    Ok((cum, total))
}

fn invert_cdf(grid: &[f64], cum: &[f64], u: f64) -> f64 {
    let idx = match cum.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
        Ok(i) => i,
        Err(i) => i,
    };
    if idx == 0 {
        return grid[0];
    }
    let i = idx.min(grid.len() - 1);
    let (c0, c1) = (cum[i - 1], cum[i]);
    let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
    grid[i - 1] + frac * (grid[i] - grid[i - 1])
}

/// Recorded phase integrals (sample-major) shared by the Monte Carlo
/// estimators below.
struct MixtureRun {
    times: Vec<f64>,
    /// phases[sample][time index]
    phases: Vec<Vec<f64>>,
}

fn smooth_stride(dt: f64) -> usize {
    // Ten records per drive period for smooth trajectories.
    (0.1 / dt).round().max(1.0) as usize
}

fn equilibrate(alpha: Complex64, params: &OscParams, burn_in: f64, dt: f64) -> Result<Complex64> {
    if burn_in <= 0.0 {
        return Ok(alpha);
    }
    let stride = usize::MAX; // endpoint only
    let traj = evolve_recorded(&OscState::new(alpha), params, burn_in, dt, stride)?;
    Ok(*traj.alphas.last().unwrap())
}

fn run_mixture(
    mixture: &CoherentMixture,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<MixtureRun> {
    check_dt(params, dt)?;
    let alphas = mixture.sample_alphas()?;
    let stride = match &params.drive {
        Drive::Kicked { .. } => 1,
        Drive::Smooth { .. } => smooth_stride(dt),
    };
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = alphas
        .par_iter()
        .map(|&a0| {
            let a = equilibrate(a0, params, mixture.burn_in, dt)?;
            let traj = evolve_recorded(&OscState::new(a), params, t_max, dt, stride)?;
            Ok((traj.times, traj.phases))
        })
        .collect();
    let mut times = Vec::new();
    let mut phases = Vec::with_capacity(results.len());
    for r in results {
        let (t, phi) = r?;
        if times.is_empty() {
            times = t;
        }
        phases.push(phi);
    }
    Ok(MixtureRun { times, phases })
}

/// |⟨e^{i s φ}⟩|² with per-time statistical error, fixed-order reduction.
fn squared_mean_phase_factor(run: &MixtureRun, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let n = run.phases.len();
    let inv_n = 1.0 / n as f64;
    let comp_se = inv_n.sqrt();
    let mut values = Vec::with_capacity(run.times.len());
    let mut stderrs = Vec::with_capacity(run.times.len());
    for ti in 0..run.times.len() {
        let mut re = Kahan::new();
        let mut im = Kahan::new();
        for phi in &run.phases {
            let x = scale * phi[ti];
            re.add(x.cos());
            im.add(x.sin());
        }
        let mean = Complex64::new(re.value() * inv_n, im.value() * inv_n);
        values.push(mean.norm_sqr());
        stderrs.push(2.0 * mean.norm() * comp_se + inv_n);
    }
    (values, stderrs)
}

/// Phase autocorrelation C(t) = |⟨exp(i φ(t))⟩|² over the mixture.
pub fn phase_autocorrelation(
    mixture: &CoherentMixture,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<DecaySeries> {
    let run = run_mixture(mixture, params, t_max, dt)?;
    let (values, stderrs) = squared_mean_phase_factor(&run, 1.0);
    Ok(DecaySeries::new(run.times, values).with_stderrs(stderrs))
}

/// Coherent fidelity of the mixture, 𝓕(t) = |⟨exp(i(σ/2) φ(t))⟩|².
pub fn classical_mixed_fidelity(
    mixture: &CoherentMixture,
    sigma: f64,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<DecaySeries> {
    let run = run_mixture(mixture, params, t_max, dt)?;
    let (values, stderrs) = squared_mean_phase_factor(&run, sigma / 2.0);
    Ok(DecaySeries::new(run.times, values).with_stderrs(stderrs))
}

/// Linear fit of the ensemble-mean action vs time: returns (D, intercept).
pub fn mean_action_diffusion(
    mixture: &CoherentMixture,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let series = mean_action_series(mixture, params, t_max, dt)?;
    let (slope, intercept) = linear_fit(&series.0, &series.1);
    Ok((slope, intercept))
}

/// Ensemble-mean action at every recorded time.
pub fn mean_action_series(
    mixture: &CoherentMixture,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dt(params, dt)?;
    let alphas = mixture.sample_alphas()?;
    let stride = match &params.drive {
        Drive::Kicked { .. } => 1,
        Drive::Smooth { .. } => smooth_stride(dt),
    };
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = alphas
        .par_iter()
        .map(|&a0| {
            let a = equilibrate(a0, params, mixture.burn_in, dt)?;
            let traj = evolve_recorded(&OscState::new(a), params, t_max, dt, stride)?;
            Ok((traj.times, traj.actions))
        })
        .collect();
    let mut times = Vec::new();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (t, acts) = r?;
        if times.is_empty() {
            times = t;
        }
        rows.push(acts);
    }
    let inv_n = 1.0 / rows.len() as f64;
    let means = (0..times.len())
        .map(|ti| {
            let mut acc = Kahan::new();
            for row in &rows {
                acc.add(row[ti]);
            }
            acc.value() * inv_n
        })
        .collect();
    Ok((times, means))
}

fn linear_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let tbar = ts.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        sxx += (t - tbar) * (t - tbar);
        sxy += (t - tbar) * (y - ybar);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, ybar - slope * tbar)
}

/// Second cumulant χ₂(t) = Var over the mixture of ∫₀ᵗ I dτ, evaluated as a
/// variance of the phase-integral identity instead of the double time
/// integral of the action autocorrelation (algebraically identical).
pub fn chi2_cumulant(
    mixture: &CoherentMixture,
    params: &OscParams,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let series = chi2_series(mixture, params, t, dt)?;
    Ok(*series.values.last().unwrap())
}

/// χ₂ at every recorded time up to `t_max`.
pub fn chi2_series(
    mixture: &CoherentMixture,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<DecaySeries> {
    let run = run_mixture(mixture, params, t_max, dt)?;
    let n = run.phases.len();
    let inv_n = 1.0 / n as f64;
    let mut values = Vec::with_capacity(run.times.len());
    for (ti, &t) in run.times.iter().enumerate() {
        let ints: Vec<f64> = run
            .phases
            .iter()
            .map(|phi| (phi[ti] - params.omega0 * t) / 2.0)
            .collect();
        let mut acc = Kahan::new();
        for &x in &ints {
            acc.add(x);
        }
        let mean = acc.value() * inv_n;
        let mut var = Kahan::new();
        for &x in &ints {
            var.add((x - mean) * (x - mean));
        }
        values.push(var.value() * inv_n);
    }
    Ok(DecaySeries::new(run.times, values))
}

/// Variance across paths of the cumulative trapezoid integral ∫₀ᵗ x dτ.
/// Shared by χ₂ consistency tests on surrogate processes.
pub fn variance_of_path_integrals(paths: &[Vec<f64>], dt: f64) -> Vec<f64> {
    let n_t = paths.first().map_or(0, |p| p.len());
    let n = paths.len();
    let mut integrals: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| {
            let mut cum = Vec::with_capacity(p.len());
            let mut acc = 0.0;
            cum.push(0.0);
            for w in p.windows(2) {
                acc += 0.5 * (w[0] + w[1]) * dt;
                cum.push(acc);
            }
            cum
        })
        .collect();
    let inv_n = 1.0 / n as f64;
    (0..n_t)
        .map(|ti| {
            let mean = integrals.iter().map(|c| c[ti]).sum::<f64>() * inv_n;
            integrals
                .iter_mut()
                .map(|c| (c[ti] - mean) * (c[ti] - mean))
                .sum::<f64>()
                * inv_n
        })
        .collect()
}

/// Analytic golden-rule decay curve exp(-2 σ² K t), emitted at integer times
/// for comparison against a measured coherent fidelity.
pub fn fgr_fidelity(sigma: f64, k_action: f64, t_max: f64) -> DecaySeries {
    let n = t_max.floor() as usize;
    let times: Vec<f64> = (0..=n).map(|t| t as f64).collect();
    let values = times
        .iter()
        .map(|&t| (-2.0 * sigma * sigma * k_action * t).exp())
        .collect();
    DecaySeries::new(times, values)
}

/// Samples of the quantum-cell displacement δ with density (2/πħ)e^{-2|δ|²/ħ}
/// (complex Gaussian, variance ħ/4 per real component). ħ = 0 disables the
/// fluctuations (every δ = 0).
#[derive(Clone, Copy, Debug)]
pub struct QuantumCellSampler {
    pub hbar: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl QuantumCellSampler {
    pub fn sample_deltas(&self) -> Result<Vec<Complex64>> {
        if self.n_samples == 0 {
            return Err(EchoError::EmptyEnsemble(
                "sampler needs at least one sample".into(),
            ));
        }
        if self.hbar < 0.0 {
            return Err(EchoError::InvalidParameter(
                "hbar must be non-negative".into(),
            ));
        }
        let std = (self.hbar / 4.0).sqrt();
        Ok((0..self.n_samples)
            .map(|i| {
                if self.hbar == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    let mut rng = stream(self.seed, i as u64);
                    let gx: f64 = StandardNormal.sample(&mut rng);
                    let gy: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(gx * std, gy * std)
                }
            })
            .collect())
    }
}

/// Initial-value-representation fidelity amplitude with statistical errors.
#[derive(Clone, Debug)]
pub struct IvrAmplitude {
    pub times: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub stderrs: Vec<f64>,
}

/// Semiclassical fidelity amplitude: Monte Carlo average over quantum-cell
/// displacements δ of exp{i(σ/2)φ̃(t)}, where φ̃ is the phase integral of the
/// trajectory launched from α₀+δ with the shifted linear frequency ω₀-2|δ|².
pub fn ivr_fidelity_amplitude(
    alpha0: Complex64,
    sigma: f64,
    sampler: &QuantumCellSampler,
    params: &OscParams,
    t_max: f64,
    dt: f64,
) -> Result<IvrAmplitude> {
    check_dt(params, dt)?;
    let deltas = sampler.sample_deltas()?;
    let stride = match &params.drive {
        Drive::Kicked { .. } => 1,
        Drive::Smooth { .. } => smooth_stride(dt),
    };
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = deltas
        .par_iter()
        .map(|&d| {
            let shifted = OscParams {
                omega0: params.omega0 - 2.0 * d.norm_sqr(),
                drive: params.drive.clone(),
            };
            let traj = evolve_recorded(&OscState::new(alpha0 + d), &shifted, t_max, dt, stride)?;
            Ok((traj.times, traj.phases))
        })
        .collect();
    let mut times = Vec::new();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (t, phi) = r?;
        if times.is_empty() {
            times = t;
        }
        rows.push(phi);
    }
    let n = rows.len();
    let inv_n = 1.0 / n as f64;
    let mut amplitudes = Vec::with_capacity(times.len());
    let mut stderrs = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let mut re = Kahan::new();
        let mut im = Kahan::new();
        let mut re2 = Kahan::new();
        let mut im2 = Kahan::new();
        for phi in &rows {
            let x = 0.5 * sigma * phi[ti];
            let (s, c) = x.sin_cos();
            re.add(c);
            im.add(s);
            re2.add(c * c);
            im2.add(s * s);
        }
        let mr = re.value() * inv_n;
        let mi = im.value() * inv_n;
        amplitudes.push(Complex64::new(mr, mi));
        let var = (re2.value() * inv_n - mr * mr).max(0.0)
            + (im2.value() * inv_n - mi * mi).max(0.0);
        stderrs.push((var * inv_n).sqrt());
    }
    Ok(IvrAmplitude {
        times,
        amplitudes,
        stderrs,
    })
}

/// |∂φ/∂α̊| and ∂φ/∂ω₀ at time `t`, by Richardson-checked central finite
/// differences of the phase integral (relative step 1e-6).
#[derive(Clone, Copy, Debug)]
pub struct PhaseDerivatives {
    pub d_alpha_abs: f64,
    pub d_omega: f64,
}

fn phase_at(alpha: Complex64, params: &OscParams, t: f64, dt: f64) -> Result<f64> {
    let traj = evolve_recorded(&OscState::new(alpha), params, t, dt, usize::MAX)?;
    Ok(*traj.phases.last().unwrap())
}

pub fn phase_derivatives(
    alpha0: Complex64,
    params: &OscParams,
    t: f64,
    dt: f64,
) -> Result<PhaseDerivatives> {
    let scale = alpha0.norm().max(1.0);
    let h = 1e-6 * scale;
    let central = |params: &OscParams, dir: Complex64, h: f64| -> Result<f64> {
        let plus = phase_at(alpha0 + dir * h, params, t, dt)?;
        let minus = phase_at(alpha0 - dir * h, params, t, dt)?;
        Ok((plus - minus) / (2.0 * h))
    };
    let checked = |d1: f64, d2: f64, name: &str| -> Result<f64> {
        // d1 from step h, d2 from step 2h; central differences are O(h²), so
        // the Richardson combination cancels the leading error.
        // Floor keeps round-off noise on near-zero derivatives from being
        // read as disagreement; derivatives this small never matter for the
        // fidelity exponent.
        let scale_ref = d1.abs().max(1e-5);
        if (d1 - d2).abs() > 0.1 * scale_ref {
            return Err(EchoError::UnreliableDerivative(format!(
                "{name}: finite differences disagree ({d1:.6e} vs {d2:.6e} at steps h, 2h)"
            )));
        }
        Ok((4.0 * d1 - d2) / 3.0)
    };
    let ex = Complex64::new(1.0, 0.0);
    let ey = Complex64::new(0.0, 1.0);
    let dx = checked(central(params, ex, h)?, central(params, ex, 2.0 * h)?, "dphi/dx")?;
    let dy = checked(central(params, ey, h)?, central(params, ey, 2.0 * h)?, "dphi/dy")?;
    let hw = 1e-6 * params.omega0.abs().max(1.0);
    let omega_diff = |h: f64| -> Result<f64> {
        let up = OscParams {
            omega0: params.omega0 + h,
            drive: params.drive.clone(),
        };
        let dn = OscParams {
            omega0: params.omega0 - h,
            drive: params.drive.clone(),
        };
        Ok((phase_at(alpha0, &up, t, dt)? - phase_at(alpha0, &dn, t, dt)?) / (2.0 * h))
    };
    let dw = checked(omega_diff(hw)?, omega_diff(2.0 * hw)?, "dphi/domega0")?;
    Ok(PhaseDerivatives {
        // ∂φ/∂α̊ = (φ_x - iφ_y)/2 in Wirtinger convention.
        d_alpha_abs: 0.5 * (dx * dx + dy * dy).sqrt(),
        d_omega: dw,
    })
}

/// Early-time fidelity from the double-Gaussian phase-average formula:
/// F = B⁻¹ exp{-(ε²/4ħ)|∂φ/∂α̊|² B⁻¹} with B = 1 + (ε/2)²(∂φ/∂ω₀)².
pub fn early_time_fidelity(
    alpha0: Complex64,
    epsilon: f64,
    hbar: f64,
    params: &OscParams,
    t: f64,
    dt: f64,
) -> Result<f64> {
    if hbar <= 0.0 {
        return Err(EchoError::InvalidParameter("hbar must be positive".into()));
    }
    if epsilon == 0.0 {
        return Ok(1.0);
    }
    let d = phase_derivatives(alpha0, params, t, dt)?;
    let b = 1.0 + (epsilon / 2.0).powi(2) * d.d_omega * d.d_omega;
    let exponent = -(epsilon * epsilon / (4.0 * hbar)) * d.d_alpha_abs * d.d_alpha_abs / b;
    Ok(exponent.exp() / b)
}

/// Finite-time stretching rate from two nearby trajectories with periodic
/// renormalization of their separation back to `d0` (once per drive period).
pub fn stretching_rate(
    alpha0: Complex64,
    params: &OscParams,
    t_max: f64,
    dt: f64,
    d0: f64,
) -> Result<f64> {
    if !(d0 > 0.0) {
        return Err(EchoError::InvalidParameter(
            "initial separation must be positive".into(),
        ));
    }
    check_dt(params, dt)?;
    let periods = t_max.floor() as usize;
    if periods == 0 {
        return Err(EchoError::InvalidParameter(
            "need at least one drive period".into(),
        ));
    }
    let mut a = OscState::new(alpha0);
    let mut b = OscState::new(alpha0 + Complex64::new(d0, 0.0));
    let mut log_growth = 0.0;
    for m in 0..periods {
        match &params.drive {
            Drive::Kicked { g0 } => {
                kick(&mut a, *g0);
                rotate(&mut a, params.omega0, 1.0);
                kick(&mut b, *g0);
                rotate(&mut b, params.omega0, 1.0);
            }
            Drive::Smooth { .. } => {
                let steps = (1.0 / dt).round() as usize;
                for s in 0..steps {
                    let t = m as f64 + s as f64 * dt;
                    rk4_step(&mut a, params, t, dt);
                    rk4_step(&mut b, params, t, dt);
                }
            }
        }
        let sep = b.alpha - a.alpha;
        let dist = sep.norm();
        log_growth += (dist / d0).ln();
        b.alpha = a.alpha + sep * (d0 / dist);
    }
    Ok(log_growth / periods as f64)
}

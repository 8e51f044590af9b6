//! Diagonal coherent-state mixtures: forward map from a radial weight over
//! the action to number-basis populations, and thermal-state construction.
//!
//! A mixture ρ̊ = ∫d²α̊ P(|α̊|²) |α̊⟩⟨α̊| has populations
//! ρ̊_n = (π/n!) ∫₀^∞ dI̊ P(I̊) e^{-I̊/ħ} (I̊/ħ)ⁿ. This module stores the
//! radial density with the angular factor π absorbed, p(I̊) = π·P(I̊), so
//! ∫₀^∞ p dI̊ = 1 and ρ̊_n = ∫ p(I̊)·Poisson(n; I̊/ħ) dI̊.
//!
//! The inverse map (populations → weight) is an alternating series with an
//! e^{I̊/ħ} prefactor and is catastrophically ill-conditioned; it is not
//! implemented. Thermal weights are instead built by forward matching with
//! positivity-preserving multiplicative updates.

use crate::error::{EchoError, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Radial density p(I̊) over the action, normalized to ∫ p dI̊ = 1.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialWeight {
    /// Isotropic complex-Gaussian mixture with mean action Δ:
    /// p(I̊) = (1/Δ)e^{-I̊/Δ}. This is also the harmonic-oscillator thermal
    /// weight with mean action Δ.
    Gaussian { delta: f64 },
    /// Uniform band of actions [I₀ - width/2, I₀ + width/2] (clipped at 0).
    Ring { i0: f64, width: f64 },
    /// Piecewise-linear density on an ascending grid.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl RadialWeight {
    pub fn gaussian(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(EchoError::InvalidParameter(
                "gaussian weight needs delta > 0".into(),
            ));
        }
        Ok(RadialWeight::Gaussian { delta })
    }

    pub fn ring(i0: f64, width: f64) -> Result<Self> {
        if !(i0 > 0.0) || !(width > 0.0) {
            return Err(EchoError::InvalidParameter(
                "ring weight needs i0 > 0 and width > 0".into(),
            ));
        }
        Ok(RadialWeight::Ring { i0, width })
    }

    /// Tabulated weight; rescales the values so the trapezoid integral is 1.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(EchoError::InvalidParameter(
                "tabulated weight needs matching grid/value arrays of length >= 2".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EchoError::InvalidParameter(
                "tabulated weight grid must be strictly ascending".into(),
            ));
        }
        if grid[0] < 0.0 {
            return Err(EchoError::InvalidParameter(
                "tabulated weight grid must be non-negative".into(),
            ));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(EchoError::InvalidParameter(
                "tabulated weight values must be finite and non-negative".into(),
            ));
        }
        let total = trapezoid(&grid, &values);
        if total <= 0.0 {
            return Err(EchoError::InvalidParameter(
                "tabulated weight integrates to zero".into(),
            ));
        }
        let values = values.iter().map(|v| v / total).collect();
        Ok(RadialWeight::Tabulated { grid, values })
    }

    /// Density value p(I̊).
    pub fn density(&self, action: f64) -> f64 {
        if action < 0.0 {
            return 0.0;
        }
        match self {
            RadialWeight::Gaussian { delta } => (-action / delta).exp() / delta,
            RadialWeight::Ring { i0, width } => {
                let lo = (i0 - width / 2.0).max(0.0);
                let hi = i0 + width / 2.0;
                if (lo..=hi).contains(&action) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            RadialWeight::Tabulated { grid, values } => {
                if action < grid[0] || action > *grid.last().unwrap() {
                    return 0.0;
                }
                let i = grid.partition_point(|&g| g <= action).min(grid.len() - 1);
                let (g0, g1) = (grid[i - 1], grid[i]);
                let frac = (action - g0) / (g1 - g0);
                values[i - 1] + frac * (values[i] - values[i - 1])
            }
        }
    }

    /// Upper end of the support relevant for quadrature.
    fn support_cut(&self) -> f64 {
        match self {
            RadialWeight::Gaussian { delta } => 40.0 * delta,
            RadialWeight::Ring { i0, width } => i0 + width / 2.0,
            RadialWeight::Tabulated { grid, .. } => *grid.last().unwrap(),
        }
    }

    /// Interior breakpoints where the density is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            RadialWeight::Gaussian { .. } => vec![],
            RadialWeight::Ring { i0, width } => {
                vec![(i0 - width / 2.0).max(0.0), i0 + width / 2.0]
            }
            RadialWeight::Tabulated { grid, .. } => grid.clone(),
        }
    }

    /// ∫ p dI̊ evaluated with the module's quadrature.
    pub fn normalization(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Mean action under the weight.
    pub fn mean_action(&self) -> f64 {
        self.integrate(|i| i)
    }

    /// Adaptive quadrature of ∫ p(I̊) f(I̊) dI̊ over the support.
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.integrate_seeded(f, &[])
    }

    /// Like [`integrate`](Self::integrate), with extra initial subdivision
    /// points. Adaptive bisection alone can miss an integrand peak that is
    /// narrow compared with the support (all coarse samples land on its
    /// tails and look like zero), so callers integrating localized kernels
    /// must seed the peak region explicitly.
    fn integrate_seeded(&self, f: impl Fn(f64) -> f64, seeds: &[f64]) -> f64 {
        let cut = self.support_cut();
        let mut pts: Vec<f64> = vec![0.0, cut];
        for b in self.breakpoints().into_iter().chain(seeds.iter().copied()) {
            if b > 0.0 && b < cut {
                pts.push(b);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let g = |x: f64| self.density(x) * f(x);
        let mut total = 0.0;
        for w in pts.windows(2) {
            // Evaluate endpoints a hair inside the segment so a density jump
            // sitting exactly on a breakpoint is seen one-sidedly; otherwise
            // the bisection chases the jump to its depth limit and leaves a
            // sliver of error.
            let (a, b) = (w[0], w[1]);
            let nudge = 1e-12 * (b - a);
            let gs = |x: f64| g(x.clamp(a + nudge, b - nudge));
            total += adaptive_simpson(&gs, a, b, 1e-13, 40);
        }
        total
    }
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
        .sum()
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, depth)
}

/// ln(n!) table for n = 0..=n_max.
fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for n in 1..=n_max {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}

/// Poisson(n; I/ħ) evaluated in the log domain to avoid overflow.
fn poisson_kernel(n: usize, action: f64, hbar: f64, ln_fact: &[f64]) -> f64 {
    let lam = action / hbar;
    if lam <= 0.0 {
        return if n == 0 { (-lam).exp() } else { 0.0 };
    }
    (n as f64 * lam.ln() - lam - ln_fact[n]).exp()
}

/// Number-basis populations ρ̊_n, n = 0..=n_max, of the mixture with radial
/// weight `weight` at effective Planck constant `hbar`.
///
/// Fails with a truncation error (including a suggested n_max) if more than
/// 1e-8 of the probability lies beyond n_max.
pub fn populations_from_weight(
    weight: &RadialWeight,
    hbar: f64,
    n_max: usize,
) -> Result<Vec<f64>> {
    if !(hbar > 0.0) {
        return Err(EchoError::InvalidParameter("hbar must be positive".into()));
    }
    let norm = weight.normalization();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(EchoError::InvalidParameter(format!(
            "weight is not normalized: integral = {norm:.8}"
        )));
    }
    let ln_fact = ln_factorials(n_max);
    let mut populations: Vec<f64> = (0..=n_max)
        .map(|n| {
            // The kernel peaks at I = nħ with width ~√n·ħ; seed that region
            // so the adaptive quadrature cannot overlook it.
            let peak = n as f64 * hbar;
            let width = (n as f64).sqrt().max(1.0) * hbar;
            let seeds = [
                peak - 8.0 * width,
                peak - width,
                peak,
                peak + width,
                peak + 8.0 * width,
            ];
            weight.integrate_seeded(|i| poisson_kernel(n, i, hbar, &ln_fact), &seeds)
        })
        .collect();
    for p in &mut populations {
        if *p < 0.0 {
            if *p < -1e-14 {
                return Err(EchoError::InvalidParameter(format!(
                    "population below quadrature noise floor: {p:.3e}"
                )));
            }
            *p = 0.0;
        }
    }
    let total: f64 = populations.iter().sum();
    let tail = 1.0 - total / norm;
    if tail > 1e-8 {
        let mean = weight.mean_action() / hbar;
        let var = weight.integrate(|i| (i / hbar) * (i / hbar)) - mean * mean;
        // Generous margin: exponential-tailed weights give geometric
        // population tails, which reach 1e-8 only many spreads past the mean.
        let spread = (var.max(0.0) + mean).sqrt();
        let suggested = (mean + 20.0 * spread).ceil() as usize + 20;
        return Err(EchoError::Truncation(format!(
            "probability tail beyond n_max = {n_max} is {tail:.3e} (> 1e-8); \
             suggested n_max = {suggested}"
        )));
    }
    Ok(populations)
}

/// Populations ∝ exp(-energies[n]/T), normalized over the given levels.
fn boltzmann(energies: &[f64], t_temp: f64) -> Vec<f64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut q: Vec<f64> = energies.iter().map(|e| (-(e - e0) / t_temp).exp()).collect();
    let z: f64 = q.iter().sum();
    for v in &mut q {
        *v /= z;
    }
    q
}

/// Radial weight whose populations match Boltzmann factors of the given
/// energy levels, built by positivity-preserving multiplicative matching
/// (Richardson-Lucy-style updates) of a tabulated density.
pub fn thermal_weight_for_levels(energies: &[f64], t_temp: f64, hbar: f64) -> Result<RadialWeight> {
    if !(t_temp > 0.0) {
        return Err(EchoError::InvalidParameter(
            "temperature must be positive".into(),
        ));
    }
    if !(hbar > 0.0) {
        return Err(EchoError::InvalidParameter("hbar must be positive".into()));
    }
    if energies.len() < 2 {
        return Err(EchoError::InvalidParameter(
            "need at least two energy levels".into(),
        ));
    }
    let target = boltzmann(energies, t_temp);
    let n_levels = target.len();
    let ln_fact = ln_factorials(n_levels - 1);

    // Only levels carrying real weight constrain the fit; the spectrum below
    // 1e-6 is dominated by representation limits of a smooth density.
    let significant: Vec<usize> = (0..n_levels).filter(|&n| target[n] > 1e-6).collect();
    if significant == [0] {
        // Ground-state-dominated target: a narrow triangular density at the
        // origin reproduces it to ~h/(3ħ) ≈ 3e-8, with no iteration needed.
        let h1 = 1e-7 * hbar;
        return RadialWeight::tabulated(vec![0.0, h1], vec![2.0 / h1, 0.0]);
    }
    let n_top = *significant.last().unwrap() as f64;
    let i_max = hbar * (n_top + 6.0 * n_top.sqrt() + 8.0);
    let h = hbar / 32.0;
    // Geometrically refined nodes near I = 0 (down to 1e-7·ħ) let the matched
    // density concentrate arbitrarily close to the vacuum, which the T → 0
    // limit requires; a uniform ħ/32 grid continues above them.
    let mut grid: Vec<f64> = vec![0.0];
    let mut fine = 1e-7 * hbar;
    while fine < h {
        grid.push(fine);
        fine *= 2.0;
    }
    let uniform = ((i_max / h).ceil() as usize).max(64);
    grid.extend((1..=uniform).map(|i| i as f64 * h));
    let m = grid.len();

    // Forward model K[n][i] = ∫ hat_i(I)·Poisson(n; I/ħ) dI, so that the
    // matched piecewise-linear density reproduces the very populations that
    // [`populations_from_weight`] later integrates; Simpson per half-cell is
    // accurate to O((h/ħ)⁴) relative, far below the matching residual.
    let half = |n: usize, a: f64, b: f64, rising: bool| -> f64 {
        // ∫_a^b w(x)·kernel, where w ramps 0→1 (rising) or 1→0 across [a, b].
        let fm = poisson_kernel(n, 0.5 * (a + b), hbar, &ln_fact);
        let (fa, fb) = (
            poisson_kernel(n, a, hbar, &ln_fact),
            poisson_kernel(n, b, hbar, &ln_fact),
        );
        let edge = if rising { fb } else { fa };
        (b - a) / 6.0 * (2.0 * fm + edge)
    };
    let kernel: Vec<Vec<f64>> = (0..n_levels)
        .map(|n| {
            (0..m)
                .map(|i| {
                    let mut k = 0.0;
                    if i > 0 {
                        k += half(n, grid[i - 1], grid[i], true);
                    }
                    if i < m - 1 {
                        k += half(n, grid[i], grid[i + 1], false);
                    }
                    k
                })
                .collect()
        })
        .collect();
    // Column sums Σ_n K[n][i]; close to the hat masses except at the edge.
    let col_sum: Vec<f64> = (0..m)
        .map(|i| kernel.iter().map(|row| row[i]).sum::<f64>().max(1e-300))
        .collect();

    // Semiclassical initial guess: Boltzmann density of the interpolated
    // level curve, p(I) ∝ exp(-E(I/ħ)/T); the iteration only has to supply
    // quantum corrections.
    let energy_at = |nu: f64| -> f64 {
        let lo = (nu.floor() as usize).min(n_levels - 2);
        let frac = nu - lo as f64;
        energies[lo] + frac * (energies[lo + 1] - energies[lo])
    };
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut coeffs: Vec<f64> = grid
        .iter()
        .map(|&i| (-(energy_at(i / hbar) - e0) / t_temp).exp().max(1e-280))
        .collect();

    // Shape comparison: the returned weight is renormalized, so measure the
    // worst relative deviation of the normalized model from the target.
    let assess = |coeffs: &[f64]| -> (Vec<f64>, f64, f64, usize) {
        let model: Vec<f64> = kernel
            .iter()
            .map(|row| row.iter().zip(coeffs).map(|(k, c)| k * c).sum::<f64>())
            .collect();
        let total: f64 = model.iter().sum();
        let mut residual = 0.0;
        let mut worst = 0usize;
        for &n in &significant {
            let r = (model[n] / (total * target[n]) - 1.0).abs();
            if r > residual {
                residual = r;
                worst = n;
            }
        }
        (model, total, residual, worst)
    };

    // Phase one: multiplicative (Richardson-Lucy style) updates. These keep
    // positivity and find the right overall shape quickly, but their tail
    // convergence is far too slow for the final tolerance.
    let mut residual = f64::INFINITY;
    let mut worst = 0usize;
    for _ in 0..3000 {
        let (model, total, r, w) = assess(&coeffs);
        residual = r;
        worst = w;
        if residual < 1e-6 {
            break;
        }
        let ratio: Vec<f64> = (0..n_levels)
            .map(|n| {
                if model[n] > 0.0 {
                    total * target[n] / model[n]
                } else {
                    1.0
                }
            })
            .collect();
        for i in 0..m {
            let mut update = 0.0;
            for (n, row) in kernel.iter().enumerate() {
                update += row[i] * ratio[n];
            }
            // Exponent > 1 accelerates the iteration while staying positive.
            coeffs[i] *= (update / col_sum[i]).powf(1.5);
        }
    }

    // Phase two: Gauss-Newton polish in log space. With c_i → c_i·e^{u_i}
    // the significant-level log-residuals are nearly linear in u; the
    // minimal-norm update solves a system of size n_sig × n_sig.
    let n_sig = significant.len();
    for _ in 0..60 {
        let (model, total, r, w) = assess(&coeffs);
        residual = r;
        worst = w;
        if residual < 1e-6 {
            break;
        }
        // f_s = ln(model_n / (total·target_n)); Jacobian of f_s wrt u_i is
        // K[n][i]c_i/model_n − (Σ_k K[k][i])c_i/total.
        let f: Vec<f64> = significant
            .iter()
            .map(|&n| (model[n] / (total * target[n])).ln())
            .collect();
        let jac: Vec<Vec<f64>> = significant
            .iter()
            .map(|&n| {
                (0..m)
                    .map(|i| coeffs[i] * (kernel[n][i] / model[n] - col_sum[i] / total))
                    .collect()
            })
            .collect();
        // Normal system (J Jᵀ + λI) y = −f, then du = Jᵀ y.
        let mut a = vec![vec![0.0; n_sig]; n_sig];
        for s in 0..n_sig {
            for t in s..n_sig {
                let dot: f64 = jac[s].iter().zip(&jac[t]).map(|(x, y)| x * y).sum();
                a[s][t] = dot;
                a[t][s] = dot;
            }
            a[s][s] += 1e-12 * (1.0 + a[s][s]);
        }
        let mut rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        if !solve_dense(&mut a, &mut rhs) {
            break;
        }
        let mut du = vec![0.0; m];
        for (s, y) in rhs.iter().enumerate() {
            for (i, d) in du.iter_mut().enumerate() {
                *d += jac[s][i] * y;
            }
        }
        // Damp large steps so the exponential update stays in the nearly
        // linear regime.
        let max_step = du.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        let scale = if max_step > 1.0 { 1.0 / max_step } else { 1.0 };
        for (c, d) in coeffs.iter_mut().zip(&du) {
            *c *= (scale * d).exp();
        }
    }

    if residual >= 1e-6 {
        return Err(EchoError::MatchingFailed(format!(
            "population matching stalled at relative residual {residual:.3e} \
             (level {worst}, target {:.3e})",
            target[worst]
        )));
    }
    RadialWeight::tabulated(grid, coeffs)
}

/// In-place Gaussian elimination with partial pivoting; returns false if the
/// system is numerically singular.
fn solve_dense(a: &mut [Vec<f64>], rhs: &mut [f64]) -> bool {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return false;
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for k in col + 1..n {
            acc -= a[col][k] * rhs[k];
        }
        rhs[col] = acc / a[col][col];
    }
    true
}

/// Thermal weight for the quartic oscillator levels E_n = ħω₀n + ħ²n².
pub fn thermal_weight(t_temp: f64, omega0: f64, hbar: f64) -> Result<RadialWeight> {
    if !(t_temp > 0.0) {
        return Err(EchoError::InvalidParameter(
            "temperature must be positive".into(),
        ));
    }
    // Include every level whose Boltzmann factor is above 1e-14.
    let mut n_levels = 8usize;
    loop {
        let e = |n: usize| hbar * omega0 * n as f64 + hbar * hbar * (n * n) as f64;
        let last = ((e(0) - e(n_levels - 1)) / t_temp).exp();
        if last < 1e-14 || n_levels > 4000 {
            let energies: Vec<f64> = (0..n_levels).map(e).collect();
            return thermal_weight_for_levels(&energies, t_temp, hbar);
        }
        n_levels *= 2;
    }
}

/// Write a tabulated weight as two-column text: a `# action density` header
/// then one `I P` pair per line in `%.12e` formatting.
pub fn write_tabulated(path: &Path, weight: &RadialWeight) -> Result<()> {
    let RadialWeight::Tabulated { grid, values } = weight else {
        return Err(EchoError::InvalidParameter(
            "only tabulated weights can be written to disk".into(),
        ));
    };
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "# action density")?;
    for (g, v) in grid.iter().zip(values) {
        writeln!(out, "{} {}", crate::fmt_e(*g), crate::fmt_e(*v))?;
    }
    Ok(())
}

/// Read a two-column tabulated weight written by [`write_tabulated`].
pub fn read_tabulated(path: &Path) -> Result<RadialWeight> {
    let file = std::fs::File::open(path)?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| {
                EchoError::Parse(format!("line {}: expected two columns", lineno + 1))
            })?
            .parse::<f64>()
            .map_err(|e| EchoError::Parse(format!("line {}: {e}", lineno + 1)))
        };
        grid.push(parse(parts.next())?);
        values.push(parse(parts.next())?);
    }
    RadialWeight::tabulated(grid, values)
}

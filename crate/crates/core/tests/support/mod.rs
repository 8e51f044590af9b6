//! Independent oracles shared by the integration tests.
//!
//! Nothing here reuses the library's FFT propagation path, quadrature
//! internals, or Monte Carlo machinery: rotor evolution is dense matrix
//! algebra over directly summed DFT matrices, integrals use a locally
//! implemented adaptive Simpson rule or Gauss-Hermite nodes found by
//! bisection, and surrogate processes are generated from their exact
//! discrete-time update.

#![allow(dead_code)]

use echo_lab::hilbert::{QuantumState, TorusGrid};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

/// Direct-summation inner product (no compensation, plain accumulation).
pub fn naive_overlap(a: &QuantumState, b: &QuantumState) -> Complex64 {
    a.amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// Dense one-period propagator for the kicked rotor, built from directly
/// summed DFT matrices and exact diagonal phases. O(N²) per application.
pub struct DenseRotor {
    /// Row-major N x N one-period matrix.
    matrix: Vec<Complex64>,
    n: usize,
}

impl DenseRotor {
    pub fn new(grid: TorusGrid, kick_strength: f64, kinetic_factor: f64) -> Self {
        let n = grid.n();
        let hbar = grid.hbar();
        let kick: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, -kick_strength * grid.theta(j).cos() / hbar))
            .collect();
        let kin: Vec<Complex64> = (0..n)
            .map(|k| {
                let p = grid.momentum(k);
                Complex64::from_polar(1.0, -kinetic_factor * p * p / (2.0 * hbar))
            })
            .collect();
        // U = F⁻¹ · diag(kin) · F · diag(kick), with F_kj = e^{-2πi kj/N}.
        let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
        for row in 0..n {
            for col in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let fwd = Complex64::from_polar(1.0, -TAU * (k * col) as f64 / n as f64);
                    let inv = Complex64::from_polar(1.0, TAU * (row * k) as f64 / n as f64);
                    acc += inv * kin[k] * fwd;
                }
                matrix[row * n + col] = acc / n as f64 * kick[col];
            }
        }
        Self { matrix, n }
    }

    pub fn apply(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|row| {
                let mut acc = Complex64::new(0.0, 0.0);
                for col in 0..self.n {
                    acc += self.matrix[row * self.n + col] * amplitudes[col];
                }
                acc
            })
            .collect()
    }

    pub fn evolve(&self, amplitudes: &[Complex64], steps: usize) -> Vec<Complex64> {
        let mut v = amplitudes.to_vec();
        for _ in 0..steps {
            v = self.apply(&v);
        }
        v
    }
}

pub fn max_amplitude_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Adaptive Simpson quadrature, implemented locally for oracle use.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
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
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// Gauss-Hermite nodes and weights for weight e^{-x²} (physicists'), found by
/// bisecting sign changes of the orthonormal Hermite polynomial.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Orthonormal recurrence: h₀ = π^{-1/4}, h_{k+1} = x√(2/(k+1)) h_k - √(k/(k+1)) h_{k-1}.
    let eval = |x: f64| -> Vec<f64> {
        let mut h = Vec::with_capacity(n + 1);
        h.push(PI.powf(-0.25));
        if n >= 1 {
            h.push(x * (2.0f64).sqrt() * h[0]);
        }
        for k in 1..n {
            let next = x * (2.0 / (k as f64 + 1.0)).sqrt() * h[k]
                - (k as f64 / (k as f64 + 1.0)).sqrt() * h[k - 1];
            h.push(next);
        }
        h
    };
    let bound = (2.0 * n as f64 + 1.0).sqrt() + 2.0;
    let grid = 200 * n;
    let hn = |x: f64| *eval(x).last().unwrap();
    let mut nodes = Vec::new();
    let mut prev_x = -bound;
    let mut prev_f = hn(prev_x);
    for i in 1..=grid {
        let x = -bound + 2.0 * bound * i as f64 / grid as f64;
        let fx = hn(x);
        if prev_f == 0.0 {
            nodes.push(prev_x);
        } else if prev_f * fx < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            let (mut flo, _) = (prev_f, fx);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fmid = hn(mid);
                if flo * fmid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
            nodes.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = fx;
    }
    assert_eq!(nodes.len(), n, "found {} Hermite roots, expected {n}", nodes.len());
    let weights = nodes
        .iter()
        .map(|&x| {
            let h = eval(x);
            let chr: f64 = h[..n].iter().map(|v| v * v).sum();
            1.0 / chr
        })
        .collect();
    (nodes, weights)
}

/// Exact-update Ornstein-Uhlenbeck surrogate paths: stationary mean `mean`,
/// stationary variance `var`, correlation time `tau`, sampled every `dt`.
pub fn ou_paths(
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    mean: f64,
    var: f64,
    tau: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let rho = (-dt / tau).exp();
    let noise = (var * (1.0 - rho * rho)).sqrt();
    (0..n_paths)
        .map(|i| {
            let mut rng = Lcg::new(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(i as u64 + 1)));
            let mut x = var.sqrt() * rng.gauss();
            let mut path = Vec::with_capacity(n_steps + 1);
            path.push(mean + x);
            for _ in 0..n_steps {
                x = rho * x + noise * rng.gauss();
                path.push(mean + x);
            }
            path
        })
        .collect()
}

/// Minimal deterministic generator for oracle data (independent of the
/// library's random streams).
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn gauss(&mut self) -> f64 {
        // Box-Muller.
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}

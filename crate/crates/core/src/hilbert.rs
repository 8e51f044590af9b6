//! Torus Hilbert space: grids, Gaussian packets, overlaps and packet mixtures.
//!
//! The phase-space torus 0 ≤ θ < 2π, -π ≤ p < π holds N Planck cells, fixing
//! the effective Planck constant ħ = 2π/N. States are stored in the position
//! representation on θ_j = 2πj/N.

use crate::error::{EchoError, Result};
use crate::rng::{stream, Kahan};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{PI, TAU};

/// Discretized torus phase space fixing N and ħ = 2π/N.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    n: usize,
    hbar: f64,
}

impl TorusGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Position grid point θ_j = 2πj/N.
    pub fn theta(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n as f64
    }

    /// Signed momentum index for FFT bin `k` (fftfreq convention).
    pub fn momentum_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if 2 * k < n + n % 2 {
            k
        } else {
            k - n
        }
    }

    /// Momentum grid value p_k = ħ·m_k ∈ [-π, π).
    pub fn momentum(&self, k: usize) -> f64 {
        self.hbar * self.momentum_index(k) as f64
    }
}

/// Construct the torus grid of Hilbert dimension `n`; ħ = 2π/n.
pub fn make_grid(n: usize) -> Result<TorusGrid> {
    if n < 2 {
        return Err(EchoError::InvalidDimension(format!(
            "Hilbert dimension must be at least 2, got {n}"
        )));
    }
    Ok(TorusGrid {
        n,
        hbar: TAU / n as f64,
    })
}

/// Normalized state in the position representation.
#[derive(Clone, Debug)]
pub struct QuantumState {
    pub grid: TorusGrid,
    pub amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn new(grid: TorusGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n() {
            return Err(EchoError::DimensionMismatch(format!(
                "amplitude vector length {} does not match grid dimension {}",
                amplitudes.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn norm(&self) -> f64 {
        let mut acc = Kahan::new();
        for a in &self.amplitudes {
            acc.add(a.norm_sqr());
        }
        acc.value().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amplitudes {
                *a *= inv;
            }
        }
    }

    /// Momentum eigenstate for FFT bin `k` (flat amplitude, plane-wave phase).
    pub fn momentum_eigenstate(grid: TorusGrid, k: usize) -> Self {
        let n = grid.n();
        let m = grid.momentum_index(k) as f64;
        let amp = 1.0 / (n as f64).sqrt();
        let amplitudes = (0..n)
            .map(|j| Complex64::from_polar(amp, m * grid.theta(j)))
            .collect();
        Self { grid, amplitudes }
    }
}

fn wrap_theta(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t >= TAU {
        t = 0.0;
    }
    t
}

fn wrap_momentum(p: f64) -> f64 {
    (p + PI).rem_euclid(TAU) - PI
}

/// Minimum-uncertainty Gaussian packet centered at (θ₀, p₀), periodized over
/// the torus by summing image packets over 3 winding numbers per direction
/// and renormalizing. Symmetric width σ_θ = √(ħ/2).
pub fn gaussian_packet(grid: TorusGrid, theta0: f64, p0: f64) -> QuantumState {
    let theta0 = wrap_theta(theta0);
    let p0 = wrap_momentum(p0);
    let hbar = grid.hbar();
    let n = grid.n();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
    for (j, a) in amplitudes.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for w in [-1.0, 0.0, 1.0] {
            let d = grid.theta(j) - theta0 + TAU * w;
            let envelope = (-d * d / (2.0 * hbar)).exp();
            for wp in [-1.0, 0.0, 1.0] {
                let pp = p0 + TAU * wp;
                acc += Complex64::from_polar(envelope, pp * d / hbar);
            }
        }
        *a = acc;
    }
    let mut state = QuantumState { grid, amplitudes };
    state.normalize();
    state
}

/// Inner product ⟨a|b⟩ = Σ_j a_j* b_j.
pub fn overlap(a: &QuantumState, b: &QuantumState) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(EchoError::DimensionMismatch(
            "overlap of states on different grids".into(),
        ));
    }
    let mut re = Kahan::new();
    let mut im = Kahan::new();
    for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
        let z = x.conj() * y;
        re.add(z.re);
        im.add(z.im);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Rectangle in fractional phase-space coordinates (θ/2π, p/2π).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub theta_min: f64,
    pub theta_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Region {
    pub fn new(theta_min: f64, theta_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let ok = theta_min < theta_max
            && p_min < p_max
            && (0.0..=1.0).contains(&theta_min)
            && theta_max <= 1.0
            && (0.0..=1.0).contains(&p_min)
            && p_max <= 1.0;
        if !ok {
            return Err(EchoError::InvalidRegion(format!(
                "fractional rectangle [{theta_min}, {theta_max}] x [{p_min}, {p_max}] \
                 must be non-empty and inside [0, 1] on both axes"
            )));
        }
        Ok(Self {
            theta_min,
            theta_max,
            p_min,
            p_max,
        })
    }

    /// Phase-space area in (θ, p) units.
    pub fn area(&self) -> f64 {
        (self.theta_max - self.theta_min) * TAU * (self.p_max - self.p_min) * TAU
    }

    /// Number of Planck cells covered: round(area / 2πħ).
    pub fn cell_count(&self, hbar: f64) -> usize {
        (self.area() / (TAU * hbar)).round().max(1.0) as usize
    }
}

/// One packet of an incoherent mixture: center and statistical weight.
#[derive(Clone, Copy, Debug)]
pub struct MixtureMember {
    pub theta0: f64,
    pub p0: f64,
    pub weight: f64,
}

/// Weighted collection of Gaussian packet centers representing an incoherent
/// mixture supported on `region`.
#[derive(Clone, Debug)]
pub struct PacketMixture {
    pub grid: TorusGrid,
    pub members: Vec<MixtureMember>,
    pub region: Region,
    /// Planck cells covered by the region.
    pub cell_count: usize,
}

/// Equal-weight mixture of `count` packet centers drawn uniformly in `region`.
/// Deterministic: each member uses its own counter-derived stream of `seed`.
pub fn uniform_mixture(
    grid: TorusGrid,
    region: Region,
    count: usize,
    seed: u64,
) -> Result<PacketMixture> {
    if count == 0 {
        return Err(EchoError::EmptyEnsemble(
            "mixture must have at least one member".into(),
        ));
    }
    let weight = 1.0 / count as f64;
    let members = (0..count)
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let theta0 = TAU * (region.theta_min + (region.theta_max - region.theta_min) * u);
            let p0 = wrap_momentum(TAU * (region.p_min + (region.p_max - region.p_min) * v));
            MixtureMember { theta0, p0, weight }
        })
        .collect();
    Ok(PacketMixture {
        grid,
        members,
        region,
        cell_count: region.cell_count(grid.hbar()),
    })
}

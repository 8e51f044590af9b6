//! End-to-end acceptance gate: eleven numbered criteria, each printing one
//! PASS/FAIL line. Criteria 3, 4, and 7 share one mixture-echo run.

mod support;

use echo_lab::classical_rotor::{angular_correlation, lyapunov_exponent, ClassicalEnsemble};
use echo_lab::glauber::{populations_from_weight, RadialWeight};
use echo_lab::hilbert::{gaussian_packet, make_grid, uniform_mixture, Region};
use echo_lab::oscillator::{
    chi2_series, classical_mixed_fidelity, early_time_fidelity, ivr_fidelity_amplitude,
    phase_autocorrelation, CoherentMixture, Drive, OscParams, QuantumCellSampler, RadialFamily,
};
use echo_lab::qkr::{mixture_echo, EchoRecord, RotorParams, RotorPropagator};
use echo_lab::series::fit_decay_rate;
use num_complex::Complex64;
use std::sync::OnceLock;
use support::{gauss_hermite, max_amplitude_error, DenseRotor};

fn report(criterion: usize, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} — {detail}");
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn study_region() -> Region {
    Region::new(0.2, 0.3, 0.3, 0.4).unwrap()
}

#[test]
fn criterion_01_null_perturbation_unitarity() {
    let grid = make_grid(1 << 11).unwrap();
    let params = RotorParams::new(10.0, 0.0);
    let mixture = uniform_mixture(grid, study_region(), 8, 1).unwrap();
    let record = mixture_echo(&mixture, 50, &params).unwrap();
    let mut err = 0.0f64;
    for t in 0..=50 {
        err = err
            .max((record.coherent[t] - 1.0).abs())
            .max((record.incoherent[t] - 1.0).abs())
            .max((record.trace_overlap[t] - 1.0).abs());
    }
    report(
        1,
        err < 1e-10,
        &format!("epsilon = 0 keeps all three fidelities at 1 (max dev {err:.2e})"),
    );
}

#[test]
fn criterion_02_dense_oracle_equivalence() {
    let mut worst = 0.0f64;
    for n in [4usize, 8, 16] {
        for kick in [0.0, 1.0, 5.0] {
            let grid = make_grid(n).unwrap();
            let params = RotorParams::new(kick, 0.0);
            let prop = RotorPropagator::new(grid, &params);
            let oracle = DenseRotor::new(grid, kick, 1.0);
            let mut psi = gaussian_packet(grid, 1.0, 0.0);
            let dense = oracle.evolve(&psi.amplitudes, 10);
            for _ in 0..10 {
                prop.step(&mut psi, false);
            }
            worst = worst.max(max_amplitude_error(&psi.amplitudes, &dense));
        }
    }
    report(
        2,
        worst < 1e-9,
        &format!("split-operator vs dense propagator, max amplitude error {worst:.2e}"),
    );
}

/// Shared run for criteria 3, 4, 7: the reference chaotic-rotor echo.
fn reference_echo() -> &'static EchoRecord {
    static RECORD: OnceLock<EchoRecord> = OnceLock::new();
    RECORD.get_or_init(|| {
        let grid = make_grid(1 << 13).unwrap();
        let params = RotorParams::new(10.0, 1.1 * grid.hbar());
        let mixture = uniform_mixture(grid, study_region(), 64, 1).unwrap();
        mixture_echo(&mixture, 14, &params).unwrap()
    })
}

fn echo_times() -> Vec<f64> {
    (0..=14).map(|t| t as f64).collect()
}

#[test]
fn criterion_03_coherent_rate_follows_correlation_not_lyapunov() {
    let record = reference_echo();
    // The first couple of kicks carry a transient; the exponential stage of
    // the coherent fidelity is fitted from t = 3 once the decay is clean.
    let fit = fit_decay_rate(&echo_times(), &record.coherent, (3.0, 9.0)).unwrap();
    let near_correlation = (fit.rate - 1.1).abs() < 0.2 * 1.1;
    let away_from_lyapunov = (fit.rate - 1.61).abs() > fit.rate_stderr;
    report(
        3,
        near_correlation && away_from_lyapunov,
        &format!(
            "coherent rate {:.3} (stderr {:.3}) vs correlation rate 1.1, Lyapunov 1.61",
            fit.rate, fit.rate_stderr
        ),
    );
}

fn classical_rate() -> f64 {
    static RATE: OnceLock<f64> = OnceLock::new();
    *RATE.get_or_init(|| {
        let ensemble = ClassicalEnsemble::uniform_in_region(&study_region(), 100_000, 1).unwrap();
        let mut series = angular_correlation(&ensemble, 2.0, 10.0, 10).unwrap();
        series.fit((1.0, 6.0)).unwrap().rate
    })
}

#[test]
fn criterion_04_classical_correlator_agreement() {
    let classical = classical_rate();
    let quantum = fit_decay_rate(&echo_times(), &reference_echo().coherent, (3.0, 9.0))
        .unwrap()
        .rate;
    let near_reference = (classical - 1.1).abs() < 0.2 * 1.1;
    let near_quantum = (classical - quantum).abs() < 0.2 * quantum;
    report(
        4,
        near_reference && near_quantum,
        &format!("classical rate {classical:.3} vs reference 1.1 and quantum rate {quantum:.3}"),
    );
}

#[test]
fn criterion_05_lyapunov_exponent() {
    let est = lyapunov_exponent(10.0, 200, 1000, 1).unwrap();
    let reference = 5.0f64.ln();
    report(
        5,
        (est.value - reference).abs() < 0.05 * reference,
        &format!("Lyapunov estimate {:.4} vs ln(5) = {reference:.4}", est.value),
    );
}

#[test]
fn criterion_06_saturation_plateaus() {
    let grid = make_grid(1 << 11).unwrap();
    let n = (1 << 11) as f64;
    let region = study_region();
    let cells = region.cell_count(grid.hbar()) as f64;
    let params = RotorParams::new(10.0, 1.1 * grid.hbar());
    let mixture = uniform_mixture(grid, region, 128, 1).unwrap();
    let record = mixture_echo(&mixture, 25, &params).unwrap();
    let late = 15..=25usize;
    let avg = |xs: &[f64]| -> f64 {
        late.clone().map(|t| xs[t]).sum::<f64>() / late.clone().count() as f64
    };
    let incoherent = avg(&record.incoherent);
    let coherent = avg(&record.coherent);
    let (floor_inc, floor_coh) = (1.0 / n, 1.0 / (n * cells));
    let ok = |v: f64, f: f64| v > f / 3.0 && v < 3.0 * f;
    report(
        6,
        ok(incoherent, floor_inc) && ok(coherent, floor_coh),
        &format!(
            "plateaus: incoherent {incoherent:.2e} vs 1/N = {floor_inc:.2e}, \
             coherent {coherent:.2e} vs 1/(N·M) = {floor_coh:.2e} (M = {cells})"
        ),
    );
}

#[test]
fn criterion_07_incoherent_delay_and_common_slope() {
    let record = reference_echo();
    let pointwise = (0..=14).all(|t| record.incoherent[t] >= record.coherent[t] - 1e-10);
    let delayed = record.incoherent[2] > 0.5 && record.coherent[2] < 0.1;
    let times = echo_times();
    let coh = fit_decay_rate(&times, &record.coherent, (3.0, 9.0)).unwrap().rate;
    let inc = fit_decay_rate(&times, &record.incoherent, (4.0, 10.0)).unwrap().rate;
    let slopes_agree = (coh - inc).abs() < 0.25 * coh.max(inc);
    report(
        7,
        pointwise && delayed && slopes_agree,
        &format!(
            "ordering {pointwise}, delay at t = 2: incoherent {:.3} vs coherent {:.3}, \
             slopes {coh:.3}/{inc:.3}",
            record.incoherent[2], record.coherent[2]
        ),
    );
}

#[test]
fn criterion_08_oscillator_golden_rule_and_saturated_rate() {
    // Small sigma: the fidelity follows exp(-2 σ² K t) with K from the
    // long-time slope of the cumulant chi2.
    let fgr_params = OscParams {
        omega0: 1.0,
        drive: Drive::smooth_equal(1.8, 4, vec![0.9, 2.2, 4.1, 5.3]),
    };
    let fgr_mixture = CoherentMixture::new(
        Complex64::new(5.8f64.sqrt(), 0.0),
        RadialFamily::Gaussian { delta: 0.5 },
        10_000,
        0,
    )
    .with_burn_in(30.0);
    let sigma = 0.05;
    let fid = classical_mixed_fidelity(&fgr_mixture, sigma, &fgr_params, 30.0, 0.01).unwrap();
    let t_star = fid
        .times
        .iter()
        .zip(&fid.values)
        .find(|(_, &v)| v < 0.1)
        .map(|(&t, _)| t)
        .unwrap_or(30.0);
    let chi2 = chi2_series(&fgr_mixture, &fgr_params, 30.0, 0.01).unwrap();
    let k_action = linear_slope(&chi2.times, &chi2.values, 2.0, t_star) / 2.0;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for (&t, &v) in fid.times.iter().zip(&fid.values) {
        if v > 0.05 {
            ts.push(t);
            vs.push(v);
        }
    }
    let measured = fit_decay_rate(&ts, &vs, (2.0, t_star)).unwrap().rate;
    let predicted = 2.0 * sigma * sigma * k_action;
    let fgr_ok = (measured - predicted).abs() < 0.2 * predicted;

    // Large sigma: the rate saturates at the phase-correlation decay rate
    // and stops depending on sigma.
    let sat_params = OscParams {
        omega0: 1.0,
        drive: Drive::smooth_equal(5.0, 3, vec![0.0, 0.0, 0.0]),
    };
    let sat_mixture = CoherentMixture::new(
        Complex64::new(5.0f64.sqrt(), 0.0),
        RadialFamily::Gaussian { delta: 0.5 },
        30_000,
        0,
    );
    let window = (4.0, 16.0);
    let rate = |sigma: f64| -> f64 {
        let mut s = classical_mixed_fidelity(&sat_mixture, sigma, &sat_params, 20.0, 0.01).unwrap();
        s.fit(window).unwrap().rate
    };
    let (r2, r4) = (rate(2.0), rate(4.0));
    let mut auto = phase_autocorrelation(&sat_mixture, &sat_params, 20.0, 0.01).unwrap();
    let r_corr = auto.fit(window).unwrap().rate;
    let sat_ok = (r2 - r4).abs() < 0.2 * r2.max(r4)
        && (r2 - r_corr).abs() < 0.2 * r_corr
        && (r4 - r_corr).abs() < 0.2 * r_corr;
    report(
        8,
        fgr_ok && sat_ok,
        &format!(
            "golden-rule rate {measured:.4} vs 2σ²K = {predicted:.4}; \
             saturated rates σ=2: {r2:.3}, σ=4: {r4:.3}, correlation: {r_corr:.3}"
        ),
    );
}

fn linear_slope(times: &[f64], values: &[f64], t0: f64, t1: f64) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= t0 && t <= t1)
        .map(|(&t, &v)| (t, v))
        .collect();
    let n = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let vbar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.0 - tbar)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tbar) * (p.1 - vbar)).sum();
    sxy / sxx
}

#[test]
fn criterion_09_ivr_limits_and_quadrature() {
    // No quantum fluctuations: the amplitude must not decay at all.
    let chaotic = OscParams {
        omega0: 1.0,
        drive: Drive::Kicked { g0: 0.3 },
    };
    let frozen = QuantumCellSampler {
        hbar: 0.0,
        n_samples: 500,
        seed: 1,
    };
    let alpha_chaotic = Complex64::new(30.0f64.sqrt(), 0.0);
    let no_decay = ivr_fidelity_amplitude(alpha_chaotic, 2.0, &frozen, &chaotic, 8.0, 0.0)
        .unwrap()
        .amplitudes
        .iter()
        .all(|f| (f.norm() - 1.0).abs() < 1e-12);

    // Integrable case against the two-dimensional Gauss-Hermite oracle.
    let (omega0, sigma, hbar) = (1.0, 0.3, 0.05);
    let alpha0 = Complex64::new(2.0f64.sqrt(), 0.0);
    let free = OscParams {
        omega0,
        drive: Drive::Kicked { g0: 0.0 },
    };
    let sampler = QuantumCellSampler {
        hbar,
        n_samples: 20_000,
        seed: 7,
    };
    let mc = ivr_fidelity_amplitude(alpha0, sigma, &sampler, &free, 5.0, 0.0).unwrap();
    let (nodes, weights) = gauss_hermite(32);
    let scale = (hbar / 2.0).sqrt();
    let mut quad_ok = true;
    let mut worst = 0.0f64;
    for t in 1..=5usize {
        let tf = t as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &wx) in nodes.iter().zip(&weights) {
            for (&y, &wy) in nodes.iter().zip(&weights) {
                let delta = Complex64::new(x * scale, y * scale);
                let shifted = alpha0 + delta;
                let phase = (omega0 - 2.0 * delta.norm_sqr() + 2.0 * shifted.norm_sqr()) * tf;
                acc += wx * wy * Complex64::from_polar(1.0, 0.5 * sigma * phase);
            }
        }
        let quad = acc / std::f64::consts::PI;
        let pull = (mc.amplitudes[t] - quad).norm() / mc.stderrs[t].max(1e-12);
        worst = worst.max(pull);
        quad_ok &= pull < 3.0;
    }
    report(
        9,
        no_decay && quad_ok,
        &format!("no-fluctuation limit flat: {no_decay}; worst quadrature pull {worst:.2} sigma"),
    );
}

#[test]
fn criterion_10_superexponential_early_time_law() {
    let params = OscParams {
        omega0: 1.0,
        drive: Drive::Kicked { g0: 0.3 },
    };
    let alpha0 = Complex64::new(30.0f64.sqrt(), 0.0);
    let (epsilon, hbar) = (1e-5, 1e-3);
    let times: Vec<f64> = (1..=6).map(|t| t as f64).collect();
    let logs: Vec<f64> = times
        .iter()
        .map(|&t| {
            let f = early_time_fidelity(alpha0, epsilon, hbar, &params, t, 0.0).unwrap();
            (-f.ln()).ln()
        })
        .collect();
    let slope = linear_slope(&times, &logs, 0.0, 7.0);
    let n = times.len() as f64;
    let tbar = times.iter().sum::<f64>() / n;
    let ybar = logs.iter().sum::<f64>() / n;
    let rms = (times
        .iter()
        .zip(&logs)
        .map(|(t, y)| (y - ybar - slope * (t - tbar)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let residual = rms / (slope.abs() * (times.last().unwrap() - times[0]));
    report(
        10,
        slope > 0.0 && residual < 0.1,
        &format!("ln(-ln F) slope {slope:.3} per unit time, linearity residual {residual:.3}"),
    );
}

#[test]
fn criterion_11_glauber_closed_forms() {
    let hbar = 0.05;
    let i0 = 4.0 * hbar;
    let ring = RadialWeight::ring(i0, 1e-6 * i0).unwrap();
    let ring_pops = populations_from_weight(&ring, hbar, 40).unwrap();
    let poisson4 = 256.0 * (-4.0f64).exp() / 24.0;
    let poisson_ok = (ring_pops[4] - poisson4).abs() < 1e-4;
    let sum_ok = (ring_pops.iter().sum::<f64>() - 1.0).abs() < 1e-8;

    let (delta, hb) = (0.4, 0.1);
    let nbar = delta / hb;
    let thermal = RadialWeight::gaussian(delta).unwrap();
    let pops = populations_from_weight(&thermal, hb, 400).unwrap();
    let mut geometric_ok = true;
    for n in 0..=2usize {
        let expected = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
        geometric_ok &= (pops[n] - expected).abs() < 1e-8;
    }
    report(
        11,
        poisson_ok && sum_ok && geometric_ok,
        &format!(
            "ring rho_4 = {:.6} vs {poisson4:.6}, sum-to-one {sum_ok}, geometric levels {geometric_ok}",
            ring_pops[4]
        ),
    );
}

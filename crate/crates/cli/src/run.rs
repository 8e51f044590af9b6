//! Experiment orchestration: compose library operations per configured kind,
//! persist CSV series plus a JSON summary, and print the fitted rates.

use crate::config::{Config, OscillatorSection};
use crate::output::{compare_rates, read_csv, write_csv, FitSummary, Scalar, SeriesSummary, Summary};
use echo_lab::classical_rotor::{angular_correlation, ClassicalEnsemble};
use echo_lab::glauber::{populations_from_weight, read_tabulated, thermal_weight, RadialWeight};
use echo_lab::hilbert::{make_grid, uniform_mixture, Region};
use echo_lab::oscillator::{
    chi2_series, classical_mixed_fidelity, fgr_fidelity, ivr_fidelity_amplitude,
    phase_autocorrelation, CoherentMixture, Drive, OscParams, QuantumCellSampler, RadialFamily,
};
use echo_lab::qkr::{mixture_echo, RotorParams};
use echo_lab::series::DecaySeries;
use echo_lab::Result;
use num_complex::Complex64;
use std::path::Path;

/// Run the configured experiment, writing everything into `out_dir`.
pub fn run(config: &Config, out_dir: &Path, seed: u64) -> Result<Summary> {
    std::fs::create_dir_all(out_dir)?;
    let mut summary = Summary::new(config, seed);
    match config.experiment.kind.as_str() {
        "rotor-echo" => rotor_echo(config, out_dir, seed, &mut summary)?,
        "rotor-classical" => rotor_classical(config, out_dir, seed, &mut summary)?,
        "osc-correlation" => osc_correlation(config, out_dir, seed, &mut summary)?,
        "osc-fgr" => osc_fgr(config, out_dir, seed, &mut summary)?,
        "osc-ivr" => osc_ivr(config, out_dir, seed, &mut summary)?,
        "glauber-populations" => glauber_populations(config, out_dir, &mut summary)?,
        "fit" => refit(config, &mut summary)?,
        other => unreachable!("validated kind {other}"),
    }
    summary.write(out_dir)?;
    Ok(summary)
}

fn region_of(r: [f64; 4]) -> Result<Region> {
    Region::new(r[0], r[1], r[2], r[3])
}

/// Persist a series, optionally fit it, and record it in the summary.
fn emit(
    series: &mut DecaySeries,
    name: &str,
    file: &str,
    window: Option<[f64; 2]>,
    plateau: Option<f64>,
    out_dir: &Path,
    summary: &mut Summary,
) -> Result<Option<f64>> {
    let mut fit = None;
    if let Some(w) = window {
        let result = series.fit((w[0], w[1]))?;
        println!(
            "{name}: rate = {:.6} +/- {:.6} per unit time (window [{}, {}])",
            result.rate, result.rate_stderr, w[0], w[1]
        );
        fit = Some(result);
    }
    write_csv(&out_dir.join(file), series)?;
    summary.series.push(SeriesSummary {
        name: name.to_string(),
        file: file.to_string(),
        rows: series.times.len(),
        fit: fit.map(FitSummary::from),
        plateau,
    });
    Ok(fit.map(|f| f.rate))
}

/// Late-time average over the final third of the record (at least 3 points).
fn plateau(values: &[f64]) -> f64 {
    let tail = (values.len() / 3).max(3).min(values.len());
    let slice = &values[values.len() - tail..];
    slice.iter().sum::<f64>() / slice.len() as f64
}

fn rotor_echo(config: &Config, out_dir: &Path, seed: u64, summary: &mut Summary) -> Result<()> {
    let r = config.rotor.as_ref().expect("validated");
    let grid = make_grid(r.n)?;
    let params = RotorParams::new(r.kick_strength, r.epsilon_over_hbar * grid.hbar());
    let mixture = uniform_mixture(grid, region_of(r.region)?, r.members, seed)?;
    let record = mixture_echo(&mixture, r.t_max, &params)?;
    let window = config.experiment.fit_window;

    let mut coherent = DecaySeries::new(record.times.clone(), record.coherent.clone());
    let quantum_rate = emit(
        &mut coherent,
        "coherent fidelity",
        "coherent.csv",
        window,
        Some(plateau(&record.coherent)),
        out_dir,
        summary,
    )?;
    let mut incoherent = DecaySeries::new(record.times.clone(), record.incoherent.clone());
    emit(
        &mut incoherent,
        "incoherent fidelity",
        "incoherent.csv",
        window,
        Some(plateau(&record.incoherent)),
        out_dir,
        summary,
    )?;
    let mut trace_overlap = DecaySeries::new(record.times.clone(), record.trace_overlap.clone());
    emit(
        &mut trace_overlap,
        "trace-overlap fidelity",
        "trace_overlap.csv",
        None,
        Some(plateau(&record.trace_overlap)),
        out_dir,
        summary,
    )?;

    if let Some(c) = &config.classical {
        let ensemble = ClassicalEnsemble::uniform_in_region(&region_of(c.region)?, c.trajectories, seed)?;
        let mut correlation = angular_correlation(&ensemble, c.gamma, c.kick_strength, c.t_max)?;
        let classical_rate = emit(
            &mut correlation,
            "classical correlation",
            "classical.csv",
            c.window.or(window),
            None,
            out_dir,
            summary,
        )?;
        if let (Some(q), Some(cl)) = (quantum_rate, classical_rate) {
            let report = compare_rates(q, cl, r.kick_strength);
            println!(
                "quantum/classical rate ratio = {:.4} (follows classical: {}), \
                 stretching-rate reference ln(K/2) = {:.4}",
                report.ratio, report.follows_classical, report.lyapunov_reference
            );
            summary.comparison = Some(report);
        }
    }
    Ok(())
}

fn rotor_classical(config: &Config, out_dir: &Path, seed: u64, summary: &mut Summary) -> Result<()> {
    let c = config.classical.as_ref().expect("validated");
    let ensemble = ClassicalEnsemble::uniform_in_region(&region_of(c.region)?, c.trajectories, seed)?;
    let mut correlation = angular_correlation(&ensemble, c.gamma, c.kick_strength, c.t_max)?;
    emit(
        &mut correlation,
        "classical correlation",
        "correlation.csv",
        c.window.or(config.experiment.fit_window),
        None,
        out_dir,
        summary,
    )?;
    Ok(())
}

fn oscillator_setup(osc: &OscillatorSection, seed: u64) -> (CoherentMixture, OscParams) {
    let drive = match osc.drive.as_str() {
        "kicked" => Drive::Kicked { g0: osc.g0 },
        _ => {
            let harmonics = osc.harmonics.expect("validated");
            let phases = osc
                .phases
                .clone()
                .unwrap_or_else(|| vec![0.0; harmonics]);
            Drive::smooth_equal(osc.g0, harmonics, phases)
        }
    };
    let params = OscParams {
        omega0: osc.omega0,
        drive,
    };
    let mixture = CoherentMixture::new(
        Complex64::new(osc.center, 0.0),
        RadialFamily::Gaussian { delta: osc.delta },
        osc.samples,
        seed,
    )
    .with_burn_in(osc.burn_in);
    (mixture, params)
}

fn osc_correlation(config: &Config, out_dir: &Path, seed: u64, summary: &mut Summary) -> Result<()> {
    let osc = config.oscillator.as_ref().expect("validated");
    let (mixture, params) = oscillator_setup(osc, seed);
    let mut corr = phase_autocorrelation(&mixture, &params, osc.t_max, osc.dt)?;
    emit(
        &mut corr,
        "phase correlation",
        "correlation.csv",
        config.experiment.fit_window,
        None,
        out_dir,
        summary,
    )?;
    Ok(())
}

fn osc_fgr(config: &Config, out_dir: &Path, seed: u64, summary: &mut Summary) -> Result<()> {
    let osc = config.oscillator.as_ref().expect("validated");
    let sigma = osc.sigma.ok_or_else(|| {
        echo_lab::EchoError::InvalidParameter("oscillator.sigma is required for osc-fgr".into())
    })?;
    let (mixture, params) = oscillator_setup(osc, seed);
    let window = config.experiment.fit_window;

    let mut fidelity = classical_mixed_fidelity(&mixture, sigma, &params, osc.t_max, osc.dt)?;
    emit(
        &mut fidelity,
        "mixed fidelity",
        "fidelity.csv",
        window,
        None,
        out_dir,
        summary,
    )?;

    let mut chi2 = chi2_series(&mixture, &params, osc.t_max, osc.dt)?;
    let (t0, t1) = window
        .map(|w| (w[0], w[1]))
        .unwrap_or((osc.t_max / 4.0, osc.t_max));
    let k_action = linear_slope(&chi2.times, &chi2.values, t0, t1) / 2.0;
    emit(&mut chi2, "chi2 cumulant", "chi2.csv", None, None, out_dir, summary)?;

    let mut prediction = fgr_fidelity(sigma, k_action, osc.t_max);
    emit(
        &mut prediction,
        "golden-rule prediction",
        "prediction.csv",
        None,
        None,
        out_dir,
        summary,
    )?;
    let predicted_rate = 2.0 * sigma * sigma * k_action;
    println!("golden-rule prediction: K = {k_action:.6}, rate 2 sigma^2 K = {predicted_rate:.6}");
    summary.scalars.push(Scalar {
        name: "k_action".into(),
        value: k_action,
    });
    summary.scalars.push(Scalar {
        name: "predicted_rate".into(),
        value: predicted_rate,
    });
    Ok(())
}

fn osc_ivr(config: &Config, out_dir: &Path, seed: u64, summary: &mut Summary) -> Result<()> {
    let osc = config.oscillator.as_ref().expect("validated");
    let missing = |field: &str| {
        echo_lab::EchoError::InvalidParameter(format!("oscillator.{field} is required for osc-ivr"))
    };
    let sigma = osc.sigma.ok_or_else(|| missing("sigma"))?;
    let hbar = osc.hbar.ok_or_else(|| missing("hbar"))?;
    let (mixture, params) = oscillator_setup(osc, seed);
    let sampler = QuantumCellSampler {
        hbar,
        n_samples: osc.samples,
        seed,
    };
    let amp = ivr_fidelity_amplitude(mixture.center, sigma, &sampler, &params, osc.t_max, osc.dt)?;
    let values: Vec<f64> = amp.amplitudes.iter().map(|f| f.norm()).collect();
    let mut series = DecaySeries::new(amp.times, values).with_stderrs(amp.stderrs);
    emit(
        &mut series,
        "semiclassical fidelity amplitude",
        "amplitude.csv",
        config.experiment.fit_window,
        None,
        out_dir,
        summary,
    )?;
    Ok(())
}

fn glauber_populations(config: &Config, out_dir: &Path, summary: &mut Summary) -> Result<()> {
    let g = config.glauber.as_ref().expect("validated");
    let weight = match g.weight.as_str() {
        "gaussian" => RadialWeight::gaussian(g.delta.expect("validated"))?,
        "ring" => RadialWeight::ring(g.i0.expect("validated"), g.width.expect("validated"))?,
        "thermal" => thermal_weight(
            g.temperature.expect("validated"),
            g.omega0.expect("validated"),
            g.hbar,
        )?,
        _ => read_tabulated(g.path.as_ref().expect("validated"))?,
    };
    let pops = populations_from_weight(&weight, g.hbar, g.n_max)?;
    let times: Vec<f64> = (0..pops.len()).map(|n| n as f64).collect();
    let nbar: f64 = pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let mut series = DecaySeries::new(times, pops);
    emit(
        &mut series,
        "occupation populations",
        "populations.csv",
        None,
        None,
        out_dir,
        summary,
    )?;
    println!("mean occupation = {nbar:.6}");
    summary.scalars.push(Scalar {
        name: "mean_occupation".into(),
        value: nbar,
    });
    Ok(())
}

fn refit(config: &Config, summary: &mut Summary) -> Result<()> {
    let f = config.fit.as_ref().expect("validated");
    let window = config.experiment.fit_window.expect("validated");
    let mut series = read_csv(&f.csv)?;
    let result = series.fit((window[0], window[1]))?;
    println!(
        "refit of {}: rate = {:.6} +/- {:.6} (window [{}, {}])",
        f.csv.display(),
        result.rate,
        result.rate_stderr,
        window[0],
        window[1]
    );
    summary.series.push(SeriesSummary {
        name: "refit".into(),
        file: f.csv.display().to_string(),
        rows: series.times.len(),
        fit: Some(FitSummary::from(result)),
        plateau: None,
    });
    Ok(())
}

/// Ordinary least-squares slope of `values` vs `times` inside [t0, t1].
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

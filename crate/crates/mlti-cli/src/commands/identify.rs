//! `mlti identify`: data-driven scalar identification. The signal fills an
//! (L+1) x (T+1) Hankel matrix whose sides are factored into size-2 modes,
//! the train-format SVD supplies the realization, and residual diagnostics
//! quantify the fit.

use std::path::PathBuf;

use mlti::reduction::{identify_scalar_hankel, step_to_impulse, MatrixRealization};
use mlti::shape::Shape;
use mlti::PairedTensor;
use ndarray::Array2;

use crate::config::CommonOpts;
use crate::csvio::{fmt_f64, read_signal_csv, CsvFile};
use crate::tensorfile::{write_tensor_file, TensorPayload};
use crate::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct IdentifyArgs {
    /// One-column CSV of impulse (or, with --step, step) response samples.
    #[arg(long, value_name = "CSV")]
    pub signal: PathBuf,
    /// Treat the signal as a step response and difference it first.
    #[arg(long)]
    pub step: bool,
    #[command(flatten)]
    pub common: CommonOpts,
}

pub fn run(args: &IdentifyArgs) -> CliResult<()> {
    let cfg = args.common.resolve()?;
    let raw = read_signal_csv(&args.signal)?;
    let signal: Vec<f64> = if args.step {
        let one = Shape::new(vec![1])?;
        let steps: Vec<PairedTensor> = raw
            .iter()
            .map(|&v| PairedTensor::new(one.clone(), one.clone(), vec![v]))
            .collect::<Result<_, _>>()?;
        step_to_impulse(&steps)?
            .iter()
            .map(|p| p.data()[0])
            .collect()
    } else {
        raw
    };

    let (t, l) = (cfg.t_horizon, cfg.l_horizon);
    for (name, h) in [("T", t), ("L", l)] {
        if !(h + 1).is_power_of_two() {
            return Err(CliError::Invalid(format!(
                "the quantized Hankel path needs {name}+1 to be a power of two, got {}",
                h + 1
            )));
        }
    }
    if signal.len() < t + l + 2 {
        return Err(CliError::Invalid(format!(
            "{} samples cannot fill the shifted Hankel matrix; T + L + 2 = {} needed",
            signal.len(),
            t + l + 2
        )));
    }

    let re = identify_scalar_hankel(&signal, l + 1, t + 1, cfg.order, cfg.etsvd_tol)?;
    let rebuilt: Vec<f64> = re.markov(signal.len()).iter().map(|m| m[[0, 0]]).collect();
    let err_num: f64 = signal
        .iter()
        .zip(&rebuilt)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let err_den: f64 = signal.iter().map(|v| v * v).sum();
    let rel_err = if err_den > 0.0 {
        (err_num / err_den).sqrt()
    } else {
        0.0
    };

    let top = re.all_sigmas.first().copied().unwrap_or(0.0);
    let kept_at_tol = re
        .all_sigmas
        .iter()
        .filter(|&&s| s > cfg.etsvd_tol * top)
        .count();

    let dir = cfg.ensure_output_dir()?.to_path_buf();
    write_realization(&re, &dir)?;

    let mut fit = CsvFile::create(&dir.join("impulse_fit.csv"), "k,measured,reconstructed")?;
    for (k, (x, y)) in signal.iter().zip(&rebuilt).enumerate() {
        fit.row(&[k.to_string(), fmt_f64(*x), fmt_f64(*y)])?;
    }
    fit.finish()?;

    let mut sigma = CsvFile::create(&dir.join("sigma.csv"), "index,sigma")?;
    for (i, s) in re.all_sigmas.iter().enumerate() {
        sigma.row(&[(i + 1).to_string(), fmt_f64(*s)])?;
    }
    sigma.finish()?;

    write_residuals(&signal, &rebuilt, &dir)?;

    println!(
        "identified order {} model; relative reconstruction error {rel_err:e}",
        cfg.order
    );
    println!(
        "singular values above tol {:e}: {kept_at_tol} of {}",
        cfg.etsvd_tol,
        re.all_sigmas.len()
    );
    Ok(())
}

fn write_realization(re: &MatrixRealization, dir: &std::path::Path) -> CliResult<()> {
    let fold = |m: &Array2<f64>| -> CliResult<TensorPayload> {
        let rows = Shape::new(vec![m.nrows().max(1)])?;
        let cols = Shape::new(vec![m.ncols().max(1)])?;
        if m.is_empty() {
            return Ok(TensorPayload::Paired(PairedTensor::zeros(rows, cols)?));
        }
        Ok(TensorPayload::Paired(PairedTensor::psi_fold(
            &m.view(),
            rows,
            cols,
        )?))
    };
    write_tensor_file(&dir.join("identified_a.mlt"), &fold(&re.a)?)?;
    write_tensor_file(&dir.join("identified_b.mlt"), &fold(&re.b)?)?;
    write_tensor_file(&dir.join("identified_c.mlt"), &fold(&re.c)?)?;
    Ok(())
}

/// Residual autocorrelation and residual-to-signal cross-correlation,
/// normalized; a good fit leaves both near zero away from lag zero.
fn write_residuals(signal: &[f64], rebuilt: &[f64], dir: &std::path::Path) -> CliResult<()> {
    let e: Vec<f64> = signal.iter().zip(rebuilt).map(|(x, y)| x - y).collect();
    let ee: f64 = e.iter().map(|v| v * v).sum();
    let yy: f64 = signal.iter().map(|v| v * v).sum();
    let lag_max = (signal.len() / 4).min(40);
    let mut out = CsvFile::create(
        &dir.join("residuals.csv"),
        "lag,autocorrelation,crosscorrelation",
    )?;
    for lag in 0..=lag_max {
        let auto: f64 = e[lag..].iter().zip(&e).map(|(a, b)| a * b).sum();
        let cross: f64 = signal[lag..].iter().zip(&e).map(|(a, b)| a * b).sum();
        let auto_n = if ee > 0.0 { auto / ee } else { 0.0 };
        let cross_n = if ee > 0.0 && yy > 0.0 {
            cross / (ee * yy).sqrt()
        } else {
            0.0
        };
        out.row(&[lag.to_string(), fmt_f64(auto_n), fmt_f64(cross_n)])?;
    }
    out.finish()
}

//! `mlti decompose`: compress a dense or paired tensor file into train form
//! and report the junction ranks and the parameter compression ratio.

use std::path::PathBuf;

use mlti::train::{quantize, QuantizationPlan};
use mlti::{PairedTensorTrain, TensorTrain};

use crate::config::CommonOpts;
use crate::tensorfile::{read_tensor_file, write_tensor_file, TensorPayload};
use crate::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct DecomposeArgs {
    /// Tensor file of kind dense or paired.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Factor every mode into size-2 sub-modes before decomposing
    /// (paired kind only).
    #[arg(long)]
    pub quantize: bool,
    /// Output path; defaults to `<output_dir>/<input stem>.train.mlt`.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonOpts,
}

pub fn run(args: &DecomposeArgs) -> CliResult<()> {
    let cfg = args.common.resolve()?;
    let tol = cfg.decompose_tol;
    let input = read_tensor_file(&args.input)?;

    let (train, dense_params): (TensorPayload, usize) = match input {
        TensorPayload::Dense(x) => {
            if args.quantize {
                return Err(CliError::Invalid(
                    "--quantize applies to paired tensors; this file is dense".into(),
                ));
            }
            let params = x.shape().total();
            let t = TensorTrain::decompose(&x, tol, None)?;
            (TensorPayload::Train(t), params)
        }
        TensorPayload::Paired(x) => {
            let params = x.row_shape().total() * x.col_shape().total();
            let t = if args.quantize {
                let plan = QuantizationPlan::auto(x.row_shape(), x.col_shape())?;
                quantize(&x, &plan, tol, None)?
            } else {
                PairedTensorTrain::decompose(&x, tol, None)?
            };
            (TensorPayload::PairedTrain(t), params)
        }
        other => {
            return Err(CliError::Invalid(format!(
                "{} is already in train form (kind {})",
                args.input.display(),
                other.kind_name()
            )))
        }
    };

    let (ranks, train_params) = match &train {
        TensorPayload::Train(t) => (t.ranks(), t.entry_count()),
        TensorPayload::PairedTrain(t) => (t.ranks(), t.entry_count()),
        _ => unreachable!(),
    };
    for (junction, rank) in ranks[1..ranks.len() - 1].iter().enumerate() {
        println!("junction {}: rank {rank}", junction + 1);
    }
    println!(
        "parameters: {train_params} in train form, {dense_params} dense, compression ratio {:.4}",
        dense_params as f64 / train_params as f64
    );

    let output = match &args.output {
        Some(p) => p.clone(),
        None => {
            let dir = cfg.ensure_output_dir()?;
            let stem = args
                .input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "tensor".into());
            dir.join(format!("{stem}.train.mlt"))
        }
    };
    write_tensor_file(&output, &train)?;
    println!("wrote {} ({})", output.display(), train.kind_name());
    Ok(())
}

//! `mlti reduce`: run one of the reduction pipelines on system files (hobt,
//! hobpod) or on scalar impulse data (hoera) and persist the reduced model
//! with its singular-value and error-bound tables.

use std::path::{Path, PathBuf};

use mlti::reduction::{
    adjoint_snapshots, bt_matrix, hobpod, hobt, hobt_error_bound, hoera, impulse_snapshots,
    horizon_factorization, ReducedModel, ReductionOptions,
};
use mlti::shape::{Factorization, Shape};
use mlti::systems::{MltiSystem, Operator};
use mlti::PairedTensor;

use crate::config::CommonOpts;
use crate::csvio::{fmt_f64, read_signal_csv, CsvFile};
use crate::tensorfile::{read_operator, write_tensor_file, TensorPayload};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Hobt,
    Hobpod,
    Hoera,
}

#[derive(Debug, clap::Args)]
pub struct ReduceArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// State operator file (paired or gtt kind).
    #[arg(long, value_name = "FILE")]
    pub system_a: Option<PathBuf>,
    /// Input operator file.
    #[arg(long, value_name = "FILE")]
    pub system_b: Option<PathBuf>,
    /// Output operator file.
    #[arg(long, value_name = "FILE")]
    pub system_c: Option<PathBuf>,
    /// Scalar impulse-response CSV, one Markov parameter per row (hoera).
    #[arg(long, value_name = "CSV")]
    pub markov: Option<PathBuf>,
    /// Also run matrix balanced truncation on the unfolded system and print
    /// the worst singular-value discrepancy (hobt only).
    #[arg(long)]
    pub crosscheck: bool,
    #[command(flatten)]
    pub common: CommonOpts,
}

fn load_system(args: &ReduceArgs) -> CliResult<MltiSystem> {
    match (&args.system_a, &args.system_b, &args.system_c) {
        (Some(a), Some(b), Some(c)) => Ok(MltiSystem::new(
            read_operator(a)?,
            read_operator(b)?,
            read_operator(c)?,
        )?),
        _ => Err(CliError::Invalid(
            "this method needs --system-a, --system-b and --system-c".into(),
        )),
    }
}

fn factorization(
    configured: &Option<Vec<usize>>,
    order: usize,
    snapshots: usize,
) -> CliResult<Factorization> {
    match configured {
        Some(counts) => Ok(Factorization::new(counts.clone())?),
        None => Ok(horizon_factorization(order, snapshots)?),
    }
}

pub fn run(args: &ReduceArgs) -> CliResult<()> {
    let cfg = args.common.resolve()?;
    let mut opts = ReductionOptions::new(cfg.order);
    opts.lyap = cfg.lyap_options();
    opts.factor_tol = cfg.etsvd_tol;

    let red = match args.method {
        Method::Hobt => {
            let sys = load_system(args)?;
            let red = hobt(&sys, &opts)?;
            if args.crosscheck {
                let bt = bt_matrix(
                    &sys.a.psi()?.view(),
                    &sys.b.psi()?.view(),
                    &sys.c.psi()?.view(),
                    cfg.order,
                )?;
                let gap = red
                    .hankel_sigmas
                    .iter()
                    .zip(&bt.sigmas)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                println!("max sigma discrepancy vs matrix balanced truncation: {gap:e}");
            }
            red
        }
        Method::Hobpod => {
            if args.markov.is_some() {
                return Err(CliError::Invalid(
                    "hobpod reduces a system, not Markov data; drop --markov".into(),
                ));
            }
            let sys = load_system(args)?;
            let state_order = sys.state_shape().order();
            let t_fact = factorization(&cfg.t_factors, state_order, cfg.t_horizon + 1)?;
            let l_fact = factorization(&cfg.l_factors, state_order, cfg.l_horizon + 1)?;
            let forward = impulse_snapshots(&sys, cfg.t_horizon, &t_fact)?;
            let adjoint = adjoint_snapshots(&sys, cfg.l_horizon, &l_fact)?;
            hobpod(&sys, &forward, &adjoint, cfg.order, cfg.etsvd_tol)?
        }
        Method::Hoera => {
            let path = args.markov.as_ref().ok_or_else(|| {
                CliError::Invalid(
                    "hoera is data-driven: pass --markov with scalar impulse samples".into(),
                )
            })?;
            let markov = scalar_markov(path)?;
            let t_fact = match &cfg.t_factors {
                Some(counts) => Factorization::new(counts.clone())?,
                None => Factorization::new(vec![cfg.t_horizon + 1])?,
            };
            let l_fact = match &cfg.l_factors {
                Some(counts) => Factorization::new(counts.clone())?,
                None => Factorization::new(vec![cfg.l_horizon + 1])?,
            };
            hoera(&markov, &t_fact, &l_fact, cfg.order, cfg.etsvd_tol)?
        }
    };

    let dir = cfg.ensure_output_dir()?.to_path_buf();
    write_reduced_model(&red, &dir)?;
    println!(
        "{:?}: kept order {} of {} singular values, sigma_1 = {}",
        args.method,
        red.order(),
        red.all_sigmas.len(),
        red.all_sigmas.first().map(|&s| fmt_f64(s)).unwrap_or_else(|| "0".into()),
    );
    Ok(())
}

fn scalar_markov(path: &Path) -> CliResult<Vec<PairedTensor>> {
    let one = Shape::new(vec![1])?;
    read_signal_csv(path)?
        .into_iter()
        .map(|v| Ok(PairedTensor::new(one.clone(), one.clone(), vec![v])?))
        .collect()
}

fn operator_payload(op: &Operator) -> TensorPayload {
    match op {
        Operator::Dense(p) => TensorPayload::Paired(p.clone()),
        Operator::Train(t) => TensorPayload::PairedTrain(t.clone()),
    }
}

pub fn write_reduced_model(red: &ReducedModel, dir: &Path) -> CliResult<()> {
    write_tensor_file(&dir.join("reduced_a.mlt"), &operator_payload(&red.system.a))?;
    write_tensor_file(&dir.join("reduced_b.mlt"), &operator_payload(&red.system.b))?;
    write_tensor_file(&dir.join("reduced_c.mlt"), &operator_payload(&red.system.c))?;

    let mut sigma = CsvFile::create(&dir.join("sigma.csv"), "index,sigma")?;
    for (i, s) in red.all_sigmas.iter().enumerate() {
        sigma.row(&[(i + 1).to_string(), fmt_f64(*s)])?;
    }
    sigma.finish()?;

    let mut bound = CsvFile::create(&dir.join("bound.csv"), "order,tail_sum")?;
    for s in 0..=red.all_sigmas.len() {
        let eb = hobt_error_bound(&red.all_sigmas, s, None);
        bound.row(&[s.to_string(), fmt_f64(eb.tail_sum)])?;
    }
    bound.finish()?;
    Ok(())
}

//! `mlti heat-demo`: discretized 2-D heat equation with a point source and a
//! point sensor. Runs the data-driven reductions next to their matrix
//! baselines, then emits the error-versus-order and time-versus-size tables
//! behind the usual benchmark plots.

use mlti::reduction::{
    adjoint_snapshots, bt_matrix, era_matrix, hobpod, hoera, horizon_factorization,
    impulse_snapshots, markov_tensors, MatrixRealization,
};
use mlti::systems::{heat_system, markov_parameters, HeatConfig};
use ndarray::{s, Array2};

use crate::commands::timed;
use crate::commands::reduce::write_reduced_model;
use crate::config::CommonOpts;
use crate::csvio::{fmt_f64, CsvFile};
use crate::CliResult;

#[derive(Debug, clap::Args)]
pub struct HeatArgs {
    /// Interior grid points per axis for the error study.
    #[arg(long, default_value_t = 7)]
    pub grid_n: usize,
    /// Grid sizes for the timing sweep; defaults to just --grid-n.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub grid_list: Option<Vec<usize>>,
    /// Squared diffusion coefficient.
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    /// Time step; when omitted each grid uses 0.2 h^2 / c^2. The 2-D
    /// five-point stencil has eigenvalues up to 8/h^2, so the explicit step
    /// contracts only for c^2 dt / h^2 below a quarter.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Impulse-response length for the error measurements.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[command(flatten)]
    pub common: CommonOpts,
}

fn heat_config(args: &HeatArgs, grid_n: usize) -> HeatConfig {
    let mut cfg = HeatConfig {
        grid_n,
        c2: args.c2,
        dt: args.dt.unwrap_or(1.0),
    };
    if args.dt.is_none() {
        cfg.dt = 0.2 * cfg.h() * cfg.h() / cfg.c2;
    }
    cfg
}

fn impulse_error(truth: &[Array2<f64>], model: &[Array2<f64>]) -> f64 {
    let num: f64 = truth
        .iter()
        .zip(model)
        .map(|(x, y)| (x - y).iter().map(|v| v * v).sum::<f64>())
        .sum();
    let den: f64 = truth.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum();
    (num / den).sqrt()
}

fn slice_realization(re: &MatrixRealization, order: usize) -> MatrixRealization {
    MatrixRealization {
        a: re.a.slice(s![..order, ..order]).to_owned(),
        b: re.b.slice(s![..order, ..]).to_owned(),
        c: re.c.slice(s![.., ..order]).to_owned(),
        sigmas: re.sigmas[..order].to_vec(),
        all_sigmas: re.all_sigmas.clone(),
    }
}

fn clamped_era(
    markov: &[Array2<f64>],
    t: usize,
    l: usize,
    order: usize,
) -> CliResult<MatrixRealization> {
    match era_matrix(markov, t, l, order) {
        Err(mlti::Error::InsufficientRank { available, .. }) => {
            Ok(era_matrix(markov, t, l, available)?)
        }
        other => Ok(other?),
    }
}

fn clamped_bt(
    a: &Array2<f64>,
    b: &Array2<f64>,
    c: &Array2<f64>,
    order: usize,
) -> CliResult<MatrixRealization> {
    match bt_matrix(&a.view(), &b.view(), &c.view(), order) {
        Err(mlti::Error::InsufficientRank { available, .. }) => {
            Ok(bt_matrix(&a.view(), &b.view(), &c.view(), available)?)
        }
        other => Ok(other?),
    }
}

pub fn run(args: &HeatArgs) -> CliResult<()> {
    // Heat modes decay on the scale of 1/(c^2 dt mu_min), hundreds of steps
    // on the larger grids, so the data horizons default much longer here
    // than the library-wide 15.
    let mut base = crate::config::RunConfig::default();
    base.t_horizon = 127;
    base.l_horizon = 127;
    base.order = 10;
    let cfg = args.common.resolve_with(base)?;
    let dir = cfg.ensure_output_dir()?.to_path_buf();
    let (t, l, s_max) = (cfg.t_horizon, cfg.l_horizon, cfg.order);

    // Error versus reduced order on the primary grid.
    let hc = heat_config(args, args.grid_n);
    let sys = heat_system(&hc)?;
    let truth = markov_parameters(&sys, args.steps)?;
    let markov_t = markov_tensors(&sys, t + l + 2)?;
    let markov_m = markov_parameters(&sys, t + l + 2)?;
    let port_order = sys.input_shape().order();
    let state_order = sys.state_shape().order();
    let t_fact = horizon_factorization(port_order, t + 1)?;
    let l_fact = horizon_factorization(port_order, l + 1)?;
    let ts_fact = horizon_factorization(state_order, t + 1)?;
    let ls_fact = horizon_factorization(state_order, l + 1)?;
    let forward = impulse_snapshots(&sys, t, &ts_fact)?;
    let adjoint = adjoint_snapshots(&sys, l, &ls_fact)?;

    // Both matrix baselines nest: the order-s realization is the leading
    // block of the order-S one, so one full-order call serves every s.
    let am = sys.a.psi()?;
    let bm = sys.b.psi()?;
    let cm = sys.c.psi()?;
    let era_full = clamped_era(&markov_m, t, l, s_max)?;
    let bt_full = clamped_bt(&am, &bm, &cm, s_max)?;
    let s_eff = s_max.min(era_full.a.nrows()).min(bt_full.a.nrows());
    if s_eff < s_max {
        println!("note: data rank limits the study to order {s_eff}");
    }

    let mut errors = CsvFile::create(
        &dir.join("error.csv"),
        "order,hoera_error,era_error,hobpod_error,bt_error",
    )?;
    let mut at_s_max = (0.0, 0.0, 0.0);
    for order in 1..=s_eff {
        let h_red = hoera(&markov_t, &t_fact, &l_fact, order, cfg.etsvd_tol)?;
        let p_red = hobpod(&sys, &forward, &adjoint, order, cfg.etsvd_tol)?;
        let e_hoera = impulse_error(&truth, &markov_parameters(&h_red.system, args.steps)?);
        let e_hobpod = impulse_error(&truth, &markov_parameters(&p_red.system, args.steps)?);
        let e_era = impulse_error(&truth, &slice_realization(&era_full, order).markov(args.steps));
        let e_bt = impulse_error(&truth, &slice_realization(&bt_full, order).markov(args.steps));
        errors.row(&[
            order.to_string(),
            fmt_f64(e_hoera),
            fmt_f64(e_era),
            fmt_f64(e_hobpod),
            fmt_f64(e_bt),
        ])?;
        if order == s_eff {
            at_s_max = (e_hoera, e_era, e_hobpod);
            write_reduced_model(&h_red, &dir)?;
        }
    }
    errors.finish()?;

    let (e_hoera, e_era, e_hobpod) = at_s_max;
    println!(
        "grid {} ({} states), order {s_eff}: hoera error {:e}, era error {:e}, ratio {:.3}, hobpod error {:e}",
        args.grid_n,
        args.grid_n * args.grid_n,
        e_hoera,
        e_era,
        e_hoera / e_era,
        e_hobpod,
    );

    // Timing sweep over grid sizes at fixed order.
    let grids = args
        .grid_list
        .clone()
        .unwrap_or_else(|| vec![args.grid_n]);
    let mut timing = CsvFile::create(
        &dir.join("timing.csv"),
        "grid_n,states,hoera_seconds,era_seconds,hobpod_seconds,bt_seconds",
    )?;
    for &g in &grids {
        let hc = heat_config(args, g);
        let sys = heat_system(&hc)?;
        let s_g = s_max
            .min(clamped_era(&markov_parameters(&sys, t + l + 2)?, t, l, s_max)?.a.nrows());
        let (_, t_hoera) = timed(|| {
            let m = markov_tensors(&sys, t + l + 2)?;
            Ok(hoera(&m, &t_fact, &l_fact, s_g, cfg.etsvd_tol)?)
        })?;
        let (_, t_era) = timed(|| {
            let m = markov_parameters(&sys, t + l + 2)?;
            Ok(era_matrix(&m, t, l, s_g)?)
        })?;
        let (_, t_hobpod) = timed(|| {
            let fw = impulse_snapshots(&sys, t, &ts_fact)?;
            let ad = adjoint_snapshots(&sys, l, &ls_fact)?;
            Ok(hobpod(&sys, &fw, &ad, s_g, cfg.etsvd_tol)?)
        })?;
        let (_, t_bt) = timed(|| {
            let am = sys.a.psi()?;
            let bm = sys.b.psi()?;
            let cm = sys.c.psi()?;
            clamped_bt(&am, &bm, &cm, s_g)
        })?;
        timing.row(&[
            g.to_string(),
            (g * g).to_string(),
            fmt_f64(t_hoera),
            fmt_f64(t_era),
            fmt_f64(t_hobpod),
            fmt_f64(t_bt),
        ])?;
        println!(
            "grid {g} ({} states): hoera {t_hoera:.4} s, era {t_era:.4} s, hobpod {t_hobpod:.4} s, bt {t_bt:.4} s",
            g * g
        );
    }
    timing.finish()?;
    Ok(())
}

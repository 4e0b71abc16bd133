//! Run configuration: defaults, a flat key=value file, one environment
//! override for the output directory, and command-line flags on top.

use std::path::{Path, PathBuf};

use mlti::lyapunov::{LyapOptions, LyapSolver};

use crate::{CliError, CliResult};

/// Environment variable that overrides `output_dir` between the config file
/// and the flags. The only environment input the tool reads.
pub const OUTPUT_DIR_ENV: &str = "MLTI_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverChoice {
    Smith,
    SquaredSmith,
    Dense,
}

impl SolverChoice {
    pub fn to_lyap(self) -> LyapSolver {
        match self {
            SolverChoice::Smith => LyapSolver::Smith,
            SolverChoice::SquaredSmith => LyapSolver::SquaredSmith,
            SolverChoice::Dense => LyapSolver::Dense,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub decompose_tol: f64,
    pub round_tol: f64,
    pub etsvd_tol: f64,
    pub lyap_tol: f64,
    pub lyap_max_iter: usize,
    pub lyap_max_rank: Option<usize>,
    pub solver: SolverChoice,
    pub t_horizon: usize,
    pub l_horizon: usize,
    pub t_factors: Option<Vec<usize>>,
    pub l_factors: Option<Vec<usize>>,
    pub order: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            decompose_tol: 1e-10,
            round_tol: 1e-10,
            etsvd_tol: 1e-10,
            lyap_tol: 1e-10,
            lyap_max_iter: 200,
            lyap_max_rank: None,
            solver: SolverChoice::SquaredSmith,
            t_horizon: 15,
            l_horizon: 15,
            t_factors: None,
            l_factors: None,
            order: 2,
            seed: 0,
            output_dir: PathBuf::from("mlti-out"),
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file, then the output-dir environment
    /// override. Flag overrides are applied by the caller afterwards.
    pub fn load(file: Option<&Path>) -> CliResult<Self> {
        Self::load_with(RunConfig::default(), file)
    }

    /// Same precedence with command-specific defaults at the bottom.
    pub fn load_with(base: RunConfig, file: Option<&Path>) -> CliResult<Self> {
        let mut cfg = base;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Invalid(format!(
                        "{}:{}: expected key = value, got {line:?}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                cfg.set(key.trim(), value.trim()).map_err(|e| {
                    CliError::Invalid(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
            }
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = PathBuf::from(dir);
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
            value
                .parse()
                .map_err(|_| CliError::Invalid(format!("bad value {value:?} for {key}")))
        }
        match key {
            "decompose_tol" => self.decompose_tol = num(key, value)?,
            "round_tol" => self.round_tol = num(key, value)?,
            "etsvd_tol" => self.etsvd_tol = num(key, value)?,
            "lyap_tol" => self.lyap_tol = num(key, value)?,
            "lyap_max_iter" => self.lyap_max_iter = num(key, value)?,
            "lyap_max_rank" => self.lyap_max_rank = Some(num(key, value)?),
            "solver" => {
                self.solver = match value {
                    "smith" => SolverChoice::Smith,
                    "squared-smith" => SolverChoice::SquaredSmith,
                    "dense" => SolverChoice::Dense,
                    other => {
                        return Err(CliError::Invalid(format!("unknown solver {other:?}")))
                    }
                }
            }
            "t_horizon" => self.t_horizon = num(key, value)?,
            "l_horizon" => self.l_horizon = num(key, value)?,
            "t_factors" => self.t_factors = Some(parse_factors(value)?),
            "l_factors" => self.l_factors = Some(parse_factors(value)?),
            "order" => self.order = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(CliError::Invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, tol) in [
            ("decompose_tol", self.decompose_tol),
            ("round_tol", self.round_tol),
            ("etsvd_tol", self.etsvd_tol),
            ("lyap_tol", self.lyap_tol),
        ] {
            if !(tol >= 0.0) {
                return Err(CliError::Invalid(format!(
                    "{name} must be nonnegative, got {tol}"
                )));
            }
        }
        for (name, horizon, factors) in [
            ("t", self.t_horizon, &self.t_factors),
            ("l", self.l_horizon, &self.l_factors),
        ] {
            if let Some(f) = factors {
                let prod: usize = f.iter().product();
                if prod != horizon + 1 {
                    return Err(CliError::Invalid(format!(
                        "{name}_factors multiply to {prod}, but the {name} horizon needs {}",
                        horizon + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn lyap_options(&self) -> LyapOptions {
        LyapOptions {
            tol: self.round_tol,
            max_rank: self.lyap_max_rank,
            max_iters: self.lyap_max_iter,
            residual_tol: self.lyap_tol,
            solver: self.solver.to_lyap(),
            ..LyapOptions::default()
        }
    }

    /// Create the output directory if needed and return it.
    pub fn ensure_output_dir(&self) -> CliResult<&Path> {
        std::fs::create_dir_all(&self.output_dir)?;
        Ok(&self.output_dir)
    }
}

pub fn parse_factors(value: &str) -> CliResult<Vec<usize>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("bad factor list {value:?}")))
        })
        .collect()
}

/// Flags shared by every subcommand, mirroring the config file keys. Any
/// flag that is set wins over the file and the environment.
#[derive(Debug, Clone, clap::Args)]
pub struct CommonOpts {
    /// Flat key=value configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory that receives every emitted file.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub decompose_tol: Option<f64>,
    #[arg(long)]
    pub round_tol: Option<f64>,
    #[arg(long)]
    pub etsvd_tol: Option<f64>,
    #[arg(long)]
    pub lyap_tol: Option<f64>,
    #[arg(long)]
    pub lyap_max_iter: Option<usize>,
    #[arg(long)]
    pub lyap_max_rank: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    /// Impulse (reachability-side) horizon T.
    #[arg(long, value_name = "T")]
    pub t_horizon: Option<usize>,
    /// Adjoint (observability-side) horizon L.
    #[arg(long, value_name = "L")]
    pub l_horizon: Option<usize>,
    /// Comma-separated per-mode block counts multiplying to T+1.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub t_factors: Option<Vec<usize>>,
    /// Comma-separated per-mode block counts multiplying to L+1.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub l_factors: Option<Vec<usize>>,
    /// Reduced order S.
    #[arg(long, short = 's', value_name = "S")]
    pub order: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonOpts {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        self.resolve_with(RunConfig::default())
    }

    pub fn resolve_with(&self, base: RunConfig) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load_with(base, self.config.as_deref())?;
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        take!(output_dir);
        take!(decompose_tol);
        take!(round_tol);
        take!(etsvd_tol);
        take!(lyap_tol);
        take!(lyap_max_iter);
        take!(solver);
        take!(t_horizon);
        take!(l_horizon);
        take!(order);
        take!(seed);
        if self.lyap_max_rank.is_some() {
            cfg.lyap_max_rank = self.lyap_max_rank;
        }
        if self.t_factors.is_some() {
            cfg.t_factors = self.t_factors.clone();
        }
        if self.l_factors.is_some() {
            cfg.l_factors = self.l_factors.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

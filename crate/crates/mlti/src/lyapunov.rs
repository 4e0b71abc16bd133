//! Solvers for the tensor Stein equation X - A * X * A^T = B with a stable
//! square operator A. The dense path solves the unfolded matrix equation
//! directly (Kronecker solve for small state spaces, squared iteration
//! above); the train paths iterate in compressed form with per-iteration
//! rounding and symmetrization.

use crate::error::{Error, Result};
use crate::linalg::{self, mat_from_colmajor};
use crate::paired::PairedTensor;
use crate::train::{power_radius, PairedTensorTrain};
use ndarray::prelude::*;

/// Largest unfolded dimension for which the stability gate uses a dense
/// eigenvalue computation by default.
pub const DENSE_EIG_CAP: usize = 4096;

/// Largest unfolded dimension solved by a direct Kronecker linear solve.
pub const KRON_CAP: usize = 32;

/// How the spectral radius of A is checked before iterating.
#[derive(Debug, Clone, Default)]
pub enum StabilityCheck {
    /// Dense eigenvalues of the unfolding; errors above `DENSE_EIG_CAP`.
    Dense,
    /// Normalized power iteration on the train operator.
    PowerIteration { steps: usize },
    /// Dense up to `DENSE_EIG_CAP`, power iteration beyond.
    #[default]
    Auto,
    /// Skip the check; the caller vouches for stability.
    Assume,
}

/// Which algorithm solves the Stein equation behind a gramian request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LyapSolver {
    /// Plain Smith iteration, one term per step.
    Smith,
    /// Squared Smith, doubling the summed horizon per step.
    #[default]
    SquaredSmith,
    /// Unfold and solve densely; only viable at small state counts.
    Dense,
}

#[derive(Debug, Clone)]
pub struct LyapOptions {
    /// Rounding tolerance applied to the iterate each step.
    pub tol: f64,
    /// Rank cap applied when rounding.
    pub max_rank: Option<usize>,
    pub max_iters: usize,
    /// Stop once the update is this small relative to the iterate.
    pub residual_tol: f64,
    pub stability: StabilityCheck,
    /// Average the iterate with its transpose each step. Keep on for
    /// symmetric right-hand sides.
    pub symmetrize: bool,
    pub solver: LyapSolver,
}

impl Default for LyapOptions {
    fn default() -> Self {
        LyapOptions {
            tol: 1e-10,
            max_rank: None,
            max_iters: 200,
            residual_tol: 1e-10,
            stability: StabilityCheck::Auto,
            symmetrize: true,
            solver: LyapSolver::SquaredSmith,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LyapReport {
    pub iterations: usize,
    /// Relative size of the last update.
    pub update_ratio: f64,
    /// Spectral radius estimate, when the gate computed one.
    pub rho: Option<f64>,
}

fn require_square_train(a: &PairedTensorTrain) -> Result<()> {
    if a.row_shape() != a.col_shape() {
        return Err(Error::ShapeMismatch(format!(
            "Stein operator must be square, got {}x{}",
            a.row_shape(),
            a.col_shape()
        )));
    }
    Ok(())
}

/// Spectral radius of the train operator under the chosen gate; `None` for
/// `Assume`.
pub fn operator_radius(a: &PairedTensorTrain, check: &StabilityCheck) -> Result<Option<f64>> {
    require_square_train(a)?;
    let total = a.row_shape().total();
    let dense_rho = |a: &PairedTensorTrain| -> Result<f64> {
        let m = a.reconstruct()?.psi_unfold();
        linalg::spectral_radius(&m)
    };
    match check {
        StabilityCheck::Assume => Ok(None),
        StabilityCheck::Dense => {
            if total > DENSE_EIG_CAP {
                return Err(Error::InvalidConfig(format!(
                    "dense stability check at dimension {} exceeds the cap {}",
                    total, DENSE_EIG_CAP
                )));
            }
            dense_rho(a).map(Some)
        }
        StabilityCheck::PowerIteration { steps } => {
            power_radius(a, *steps, 1e-8, 40, 0x5eed).map(Some)
        }
        StabilityCheck::Auto => {
            if total <= DENSE_EIG_CAP {
                dense_rho(a).map(Some)
            } else {
                power_radius(a, 50, 1e-8, 40, 0x5eed).map(Some)
            }
        }
    }
}

fn gate(a: &PairedTensorTrain, check: &StabilityCheck) -> Result<Option<f64>> {
    let rho = operator_radius(a, check)?;
    if let Some(r) = rho {
        if r >= 1.0 {
            return Err(Error::Unstable { rho: r });
        }
    }
    Ok(rho)
}

fn symmetrize(x: &PairedTensorTrain) -> Result<PairedTensorTrain> {
    Ok(x.add(&x.transpose())?.scaled(0.5))
}

/// Dense reference solver. Checks stability, then solves the unfolded
/// equation exactly (Kronecker solve up to `KRON_CAP`) or by squared
/// iteration.
pub fn lyap_dense(a: &PairedTensor, b: &PairedTensor) -> Result<PairedTensor> {
    if a.row_shape() != a.col_shape() {
        return Err(Error::ShapeMismatch("Stein operator must be square".into()));
    }
    if b.row_shape() != a.row_shape() || b.col_shape() != a.row_shape() {
        return Err(Error::ShapeMismatch(
            "right-hand side shape does not match the operator".into(),
        ));
    }
    let n = a.row_shape().total();
    let am = a.psi_unfold();
    let bm = b.psi_unfold();
    let rho = linalg::spectral_radius(&am)?;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let xm = if n <= KRON_CAP {
        // vec(X) - (A (x) A) vec(X) = vec(B) in column-major vectorization.
        let nn = n * n;
        let mut m = Array2::<f64>::eye(nn);
        for j in 0..n {
            for i in 0..n {
                for l in 0..n {
                    for k in 0..n {
                        m[[i + n * j, k + n * l]] -= am[[i, k]] * am[[j, l]];
                    }
                }
            }
        }
        let rhs = Array1::from_vec(linalg::colmajor_of(&bm.view()));
        use ndarray_linalg::Solve;
        let x = m
            .solve(&rhs)
            .map_err(crate::error::Error::from)?;
        mat_from_colmajor(n, n, x.to_vec())
    } else {
        let mut x = bm.clone();
        let mut ak = am.clone();
        let mut converged = false;
        for _ in 0..60 {
            let axa = ak.dot(&x).dot(&ak.t());
            x += &axa;
            let upd = axa.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if upd <= 1e-14 * nx {
                converged = true;
                break;
            }
            ak = ak.dot(&ak);
        }
        if !converged {
            return Err(Error::NotConverged {
                iterations: 60,
                residual: f64::NAN,
            });
        }
        x
    };
    let sym_gap = (&bm - &bm.t()).iter().map(|v| v.abs()).fold(0.0, f64::max);
    let xm = if sym_gap <= 1e-12 * rho.max(1.0) {
        (&xm + &xm.t()) * 0.5
    } else {
        xm
    };
    PairedTensor::psi_fold(&xm.view(), a.row_shape().clone(), a.row_shape().clone())
}

/// Fixed-point iteration X <- B + A * X * A^T in train form.
pub fn lyap_tt_smith(
    a: &PairedTensorTrain,
    b: &PairedTensorTrain,
    opts: &LyapOptions,
) -> Result<(PairedTensorTrain, LyapReport)> {
    require_square_train(a)?;
    let rho = gate(a, &opts.stability)?;
    let at = a.transpose();
    let mut x = b.clone();
    x.round(opts.tol, opts.max_rank)?;
    let mut ratio = f64::INFINITY;
    for k in 1..=opts.max_iters {
        let mut next = b.add(&a.einstein(&x)?.einstein(&at)?)?;
        if opts.symmetrize {
            next = symmetrize(&next)?;
        }
        next.round(opts.tol, opts.max_rank)?;
        let diff = next.add(&x.scaled(-1.0))?.norm()?;
        let nx = next.norm()?;
        x = next;
        ratio = if nx > 0.0 { diff / nx } else { 0.0 };
        if ratio <= opts.residual_tol {
            return Ok((
                x,
                LyapReport {
                    iterations: k,
                    update_ratio: ratio,
                    rho,
                },
            ));
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: ratio,
    })
}

/// Doubling iteration X <- X + A_k * X * A_k^T, A_k <- A_k * A_k, covering
/// 2^k terms of the series after k steps.
pub fn lyap_tt_squared_smith(
    a: &PairedTensorTrain,
    b: &PairedTensorTrain,
    opts: &LyapOptions,
) -> Result<(PairedTensorTrain, LyapReport)> {
    require_square_train(a)?;
    let rho = gate(a, &opts.stability)?;
    let mut x = b.clone();
    x.round(opts.tol, opts.max_rank)?;
    let mut ak = a.clone();
    let mut ratio = f64::INFINITY;
    for k in 1..=opts.max_iters {
        // Round between the two products: the unrounded update has ranks
        // rank(A_k)^2 * rank(X), which overflows memory once A_k has been
        // squared a few times.
        let mut axa = ak.einstein(&x)?;
        axa.round(opts.tol, opts.max_rank)?;
        let mut axa = axa.einstein(&ak.transpose())?;
        axa.round(opts.tol, opts.max_rank)?;
        let mut next = x.add(&axa)?;
        if opts.symmetrize {
            next = symmetrize(&next)?;
        }
        next.round(opts.tol, opts.max_rank)?;
        let diff = axa.norm()?;
        let nx = next.norm()?;
        x = next;
        ratio = if nx > 0.0 { diff / nx } else { 0.0 };
        if ratio <= opts.residual_tol {
            return Ok((
                x,
                LyapReport {
                    iterations: k,
                    update_ratio: ratio,
                    rho,
                },
            ));
        }
        ak = ak.einstein(&ak)?;
        ak.round(opts.tol, opts.max_rank)?;
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        residual: ratio,
    })
}

/// Relative residual |X - A * X * A^T - B| / |B| of a candidate solution.
pub fn stein_residual(
    a: &PairedTensorTrain,
    x: &PairedTensorTrain,
    b: &PairedTensorTrain,
) -> Result<f64> {
    let axa = a.einstein(x)?.einstein(&a.transpose())?;
    let r = x.add(&axa.scaled(-1.0))?.add(&b.scaled(-1.0))?;
    let nb = b.norm()?;
    Ok(if nb > 0.0 { r.norm()? / nb } else { r.norm()? })
}

/// The Stein operator L(X) = X - A * X * A^T as a train over the fused mode
/// pairs of X: pair n of L has row and column mode J_n^2, and the interior
/// ranks are one more than the squared ranks of A.
pub fn lyap_operator(a: &PairedTensorTrain) -> Result<PairedTensorTrain> {
    require_square_train(a)?;
    let d = a.order();
    let fused = a.row_shape().mode_product(&a.col_shape())?;
    let identity = PairedTensorTrain::identity(&fused);
    let mut kron_cores = Vec::with_capacity(d);
    for core in a.cores() {
        let (r, j, _, q) = core.dim();
        let jj = j * j;
        let mut k = Array4::<f64>::zeros((r * r, jj, jj, q * q));
        for b2 in 0..q {
            for a2 in 0..q {
                for iq in 0..j {
                    for ii in 0..j {
                        for ip in 0..j {
                            for ij in 0..j {
                                for b1 in 0..r {
                                    for a1 in 0..r {
                                        k[[a1 + r * b1, ij + j * ii, ip + j * iq, a2 + q * b2]] =
                                            core[[a1, ij, ip, a2]] * core[[b1, ii, iq, b2]];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        kron_cores.push(k);
    }
    let kron = PairedTensorTrain::from_cores(kron_cores)?;
    identity.add(&kron.scaled(-1.0))
}

/// View a paired tensor train over J (x) J as a train over the fused shape
/// {J_n^2}, matching the row/column shapes of `lyap_operator`.
pub fn fuse_pairs(x: &PairedTensorTrain) -> crate::train::TensorTrain {
    x.to_fused()
}

/// Reachability gramian of a stable system: the solution of
/// X - A * X * A^T = B * B^T in train form.
pub fn reachability_gramian(
    sys: &crate::systems::MltiSystem,
    opts: &LyapOptions,
) -> Result<(PairedTensorTrain, LyapReport)> {
    sys.validate()?;
    let a = sys.a.to_train(opts.tol, None)?;
    let b = sys.b.to_train(opts.tol, None)?;
    let mut rhs = b.einstein(&b.transpose())?;
    rhs.round(opts.tol, opts.max_rank)?;
    match opts.solver {
        LyapSolver::Smith => lyap_tt_smith(&a, &rhs, opts),
        LyapSolver::SquaredSmith => lyap_tt_squared_smith(&a, &rhs, opts),
        LyapSolver::Dense => {
            let w = lyap_dense(&a.reconstruct()?, &rhs.reconstruct()?)?;
            let train = PairedTensorTrain::decompose(&w, opts.tol, opts.max_rank)?;
            let report = LyapReport {
                iterations: 0,
                update_ratio: 0.0,
                rho: None,
            };
            Ok((train, report))
        }
    }
}

/// Observability gramian, obtained by duality as the reachability gramian of
/// the adjoint system.
pub fn observability_gramian(
    sys: &crate::systems::MltiSystem,
    opts: &LyapOptions,
) -> Result<(PairedTensorTrain, LyapReport)> {
    reachability_gramian(&crate::systems::adjoint_system(sys)?, opts)
}

/// A stable system is reachable iff its reachability gramian is U-positive
/// definite: the smallest eigenvalue of the unfolding must exceed `tol`.
pub fn is_reachable(
    sys: &crate::systems::MltiSystem,
    opts: &LyapOptions,
    tol: f64,
) -> Result<bool> {
    let n = sys.state_dim();
    if n > DENSE_EIG_CAP {
        return Err(Error::CapacityExceeded {
            needed: n,
            budget: DENSE_EIG_CAP,
        });
    }
    let (w, _) = reachability_gramian(sys, opts)?;
    let wm = w.reconstruct()?.psi_unfold();
    let (vals, _) = linalg::eigh_sym(&wm)?;
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min > tol)
}

//! Model reduction and identification pipelines: balanced truncation over
//! train-format gramians, empirical-gramian balanced POD, the eigensystem
//! realization algorithm on block Hankel tensors, and dense matrix baselines
//! used as cross-checks.

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{self, SIGMA_FLOOR};
use crate::lyapunov::{observability_gramian, reachability_gramian, LyapOptions};
use crate::paired::PairedTensor;
use crate::shape::{Factorization, Shape};
use crate::systems::{adjoint_system, markov_parameters, MltiSystem, Operator};
use crate::train::{etsvd_factors, quantize, PairedTensorTrain, QuantizationPlan, SYMMETRY_TOL};
use ndarray::prelude::*;

/// Largest entry count of a Hankel matrix that is materialized densely.
pub const HANKEL_DENSE_BUDGET: usize = 1 << 20;

/// Which pipeline produced a reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMethod {
    Hobt,
    Hobpod,
    Hoera,
}

/// A reduced system over the state shape {1, ..., 1, S} together with the
/// Hankel singular values behind the truncation.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub system: MltiSystem,
    /// Retained Hankel singular values; the length is the reduction order.
    pub hankel_sigmas: Vec<f64>,
    /// Every Hankel singular value the pipeline computed, for error bounds
    /// and diagnostics.
    pub all_sigmas: Vec<f64>,
    pub method: ReductionMethod,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.hankel_sigmas.len()
    }
}

/// The a-priori part of the truncation error bound: twice the sum of the
/// dropped Hankel singular values, plus a measured gramian-approximation
/// term when one is available.
#[derive(Debug, Clone)]
pub struct ErrorBound {
    pub tail_sum: f64,
    pub epsilon: Option<f64>,
}

impl ErrorBound {
    pub fn total(&self) -> f64 {
        self.tail_sum + self.epsilon.unwrap_or(0.0)
    }
}

pub fn hobt_error_bound(sigmas: &[f64], retained: usize, epsilon: Option<f64>) -> ErrorBound {
    let tail_sum = 2.0 * sigmas.iter().skip(retained).sum::<f64>();
    ErrorBound { tail_sum, epsilon }
}

/// Thin factor of a symmetric positive semidefinite gramian:
/// `z * z^T` reconstructs the gramian within the truncation tolerance.
#[derive(Debug, Clone)]
pub struct GramianFactor {
    /// Factor over state shape x {1, ..., 1, C}.
    pub z: PairedTensor,
    pub eigenvalues: Vec<f64>,
}

/// Count of singular values above the hard floor relative to the largest.
fn numerical_rank(s: &[f64]) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().take_while(|&&v| v > SIGMA_FLOOR * s1).count(),
        _ => 0,
    }
}

/// Eigendecompose a weakly symmetric PSD gramian in train form and return
/// the thin dense factor Z = U * diag(sqrt(lambda)).
pub fn gramian_factor(
    w: &PairedTensorTrain,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<GramianFactor> {
    if w.row_shape() != w.col_shape() {
        return Err(Error::ShapeMismatch(
            "gramian factor of a non-square operator".into(),
        ));
    }
    let norm = w.norm()?;
    if norm > 0.0 {
        let skew = w.add(&w.transpose().scaled(-1.0))?.norm()?;
        if skew / norm > SYMMETRY_TOL {
            return Err(Error::NotSymmetric {
                asymmetry: skew / norm,
            });
        }
    }
    let f = etsvd_factors(w, tol, max_rank)?;
    let keep = f.sigmas.len();
    let mut zm = f.left.slice(s![.., ..keep]).to_owned();
    for (j, &lam) in f.sigmas.iter().enumerate() {
        let scale = lam.max(0.0).sqrt();
        zm.column_mut(j).mapv_inplace(|x| x * scale);
    }
    let col_shape = Factorization::last_mode(w.row_shape().order(), keep)?.as_shape();
    let z = PairedTensor::psi_fold(&zm.view(), w.row_shape(), col_shape)?;
    Ok(GramianFactor {
        z,
        eigenvalues: f.sigmas,
    })
}

#[derive(Debug, Clone)]
pub struct ReductionOptions {
    /// Requested reduction order S.
    pub order: usize,
    pub lyap: LyapOptions,
    /// Relative truncation for the gramian eigendecompositions.
    pub factor_tol: f64,
    pub factor_rank: Option<usize>,
}

impl ReductionOptions {
    pub fn new(order: usize) -> Self {
        ReductionOptions {
            order,
            lyap: LyapOptions::default(),
            factor_tol: 1e-10,
            factor_rank: None,
        }
    }
}

/// Balanced truncation of a stable system: train-format gramians, thin
/// eigenfactors, a dense Hankel between the factor columns, and an oblique
/// projection onto the dominant balanced directions.
pub fn hobt(sys: &MltiSystem, opts: &ReductionOptions) -> Result<ReducedModel> {
    sys.validate()?;
    let (wr, _) = reachability_gramian(sys, &opts.lyap)?;
    let (wo, _) = observability_gramian(sys, &opts.lyap)?;
    let zr = gramian_factor(&wr, opts.factor_tol, opts.factor_rank)?;
    let zo = gramian_factor(&wo, opts.factor_tol, opts.factor_rank)?;
    let zr_m = zr.z.psi_unfold();
    let zo_m = zo.z.psi_unfold();
    let hankel_size = zo_m.ncols() * zr_m.ncols();
    if hankel_size > HANKEL_DENSE_BUDGET {
        return Err(Error::CapacityExceeded {
            needed: hankel_size,
            budget: HANKEL_DENSE_BUDGET,
        });
    }
    let h = zo_m.t().dot(&zr_m);
    let (u, sig, vt) = linalg::svd_econ(&h)?;
    project_balanced(
        sys,
        &zr_m,
        &zo_m,
        &u,
        &sig,
        &vt.t().to_owned(),
        opts.order,
        ReductionMethod::Hobt,
    )
}

/// Shared tail of the balancing pipelines: given factor matrices with
/// `W_r ~ Zr Zr^T`, `W_o ~ Zo Zo^T` and the SVD of `Zo^T Zr`, build the
/// oblique projection P = Zr V S^{-1/2}, Q = Zo U S^{-1/2} and project the
/// system onto it.
#[allow(clippy::too_many_arguments)]
fn project_balanced(
    sys: &MltiSystem,
    zr_m: &Array2<f64>,
    zo_m: &Array2<f64>,
    u: &Array2<f64>,
    sigmas: &[f64],
    v: &Array2<f64>,
    order: usize,
    method: ReductionMethod,
) -> Result<ReducedModel> {
    let available = numerical_rank(sigmas);
    if order > available {
        return Err(Error::InsufficientRank {
            requested: order,
            available,
        });
    }
    if order == 0 {
        return zero_model(&sys.input_shape(), &sys.output_shape(), sigmas, method);
    }
    let retained = sigmas[..order].to_vec();
    let mut p = zr_m.dot(&v.slice(s![.., ..order]));
    let mut q = zo_m.dot(&u.slice(s![.., ..order]));
    for (j, &sig) in retained.iter().enumerate() {
        let w = 1.0 / sig.sqrt();
        p.column_mut(j).mapv_inplace(|x| x * w);
        q.column_mut(j).mapv_inplace(|x| x * w);
    }
    let state = sys.state_shape();
    let mut ap = Array2::zeros((state.total(), order));
    for j in 0..order {
        let col = DenseTensor::new(state.clone(), p.column(j).to_vec())?;
        let y = sys.a.apply(&col)?;
        ap.column_mut(j).assign(&ArrayView1::from(y.data()));
    }
    let ar = q.t().dot(&ap);
    let br = q.t().dot(&sys.b.psi()?);
    let cr = sys.c.psi()?.dot(&p);
    finish_model(
        &sys.input_shape(),
        &sys.output_shape(),
        ar,
        br,
        cr,
        retained,
        sigmas.to_vec(),
        method,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_model(
    input: &Shape,
    output: &Shape,
    ar: Array2<f64>,
    br: Array2<f64>,
    cr: Array2<f64>,
    retained: Vec<f64>,
    all_sigmas: Vec<f64>,
    method: ReductionMethod,
) -> Result<ReducedModel> {
    let s_shape = Factorization::last_mode(input.order(), ar.nrows())?.as_shape();
    let a = PairedTensor::psi_fold(&ar.view(), s_shape.clone(), s_shape.clone())?;
    let b = PairedTensor::psi_fold(&br.view(), s_shape.clone(), input.clone())?;
    let c = PairedTensor::psi_fold(&cr.view(), output.clone(), s_shape)?;
    Ok(ReducedModel {
        system: MltiSystem::new(
            Operator::Dense(a),
            Operator::Dense(b),
            Operator::Dense(c),
        )?,
        hankel_sigmas: retained,
        all_sigmas,
        method,
    })
}

/// Order-zero reduction: a single dormant state with zero dynamics, so the
/// transfer function is identically zero.
fn zero_model(
    input: &Shape,
    output: &Shape,
    all_sigmas: &[f64],
    method: ReductionMethod,
) -> Result<ReducedModel> {
    let s_shape = Shape::uniform(input.order(), 1)?;
    let a = PairedTensor::zeros(s_shape.clone(), s_shape.clone())?;
    let b = PairedTensor::zeros(s_shape.clone(), input.clone())?;
    let c = PairedTensor::zeros(output.clone(), s_shape)?;
    Ok(ReducedModel {
        system: MltiSystem::new(
            Operator::Dense(a),
            Operator::Dense(b),
            Operator::Dense(c),
        )?,
        hankel_sigmas: Vec::new(),
        all_sigmas: all_sigmas.to_vec(),
        method,
    })
}

/// Snapshot collection over a time horizon, blocked so that mode n of the
/// column shape carries the time digit inside the channel digit.
#[derive(Debug, Clone)]
pub struct SnapshotTensor {
    /// State shape x (port shape * time factorization).
    pub data: PairedTensor,
    /// Horizon T; the tensor holds T+1 snapshots per channel.
    pub horizon: usize,
    /// How the T+1 snapshot index is split across the modes.
    pub fact: Factorization,
}

/// Default blocking of a power-of-two snapshot count: factors of two spread
/// as evenly as possible over the modes, larger factors last.
pub fn horizon_factorization(order: usize, snapshots: usize) -> Result<Factorization> {
    if order == 0 || snapshots == 0 || !snapshots.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "default horizon blocking needs a power-of-two snapshot count, got {snapshots}; \
             pass an explicit factorization otherwise"
        )));
    }
    let q = snapshots.trailing_zeros() as usize;
    let lo = q / order;
    let extra = q % order;
    let counts: Vec<usize> = (0..order)
        .map(|n| 1usize << (lo + usize::from(n >= order - extra)))
        .collect();
    Factorization::new(counts)
}

/// Impulse-response snapshots: per input channel k, the states
/// B_k, A*B_k, ..., A^T*B_k are blocked over the time factorization, and the
/// channel blocks are stacked outside them.
pub fn impulse_snapshots(
    sys: &MltiSystem,
    horizon: usize,
    fact: &Factorization,
) -> Result<SnapshotTensor> {
    sys.validate()?;
    let state = sys.state_shape();
    fact.check_order(&state)?;
    if fact.total() != horizon + 1 {
        return Err(Error::InvalidFactorization(format!(
            "{} snapshots blocked by a factorization of {}",
            horizon + 1,
            fact.total()
        )));
    }
    let b = sys.b.to_dense()?;
    let input = sys.input_shape();
    let chan_fact = Factorization::new(input.sizes().to_vec())?;
    let ones = Shape::uniform(state.order(), 1)?;
    let mut channel_blocks = Vec::with_capacity(input.total());
    for k in 0..input.total() {
        let bk = b.extract_block(&chan_fact, k)?;
        let mut x = DenseTensor::new(state.clone(), bk.data().to_vec())?;
        let mut time_blocks = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            if t > 0 {
                x = sys.a.apply(&x)?;
            }
            time_blocks.push(PairedTensor::new(
                state.clone(),
                ones.clone(),
                x.data().to_vec(),
            )?);
        }
        channel_blocks.push(PairedTensor::block_row(&time_blocks, fact)?);
    }
    let data = PairedTensor::block_row(&channel_blocks, &chan_fact)?;
    Ok(SnapshotTensor {
        data,
        horizon,
        fact: fact.clone(),
    })
}

/// Observability-side snapshots: the impulse responses of the adjoint
/// system, over state shape x (output shape * time factorization).
pub fn adjoint_snapshots(
    sys: &MltiSystem,
    horizon: usize,
    fact: &Factorization,
) -> Result<SnapshotTensor> {
    impulse_snapshots(&adjoint_system(sys)?, horizon, fact)
}

/// Finite-horizon gramian X * X^T assembled from snapshots. The blocking
/// permutes columns of the unfolding only, so the product is exactly the
/// truncated gramian series.
pub fn empirical_gramian(snap: &SnapshotTensor) -> Result<PairedTensor> {
    snap.data.einstein_product(&snap.data.u_transpose())
}

/// Balanced POD: balancing directions from the SVD of the snapshot Hankel
/// Y^T * X instead of gramian solves.
pub fn hobpod(
    sys: &MltiSystem,
    forward: &SnapshotTensor,
    adjoint: &SnapshotTensor,
    order: usize,
    tol: f64,
) -> Result<ReducedModel> {
    sys.validate()?;
    let state = sys.state_shape();
    if *forward.data.row_shape() != state || *adjoint.data.row_shape() != state {
        return Err(Error::ShapeMismatch(
            "snapshot tensors must live over the system state shape".into(),
        ));
    }
    let h = adjoint.data.u_transpose().einstein_product(&forward.data)?;
    let ht = PairedTensorTrain::decompose(&h, tol * 1e-2, None)?;
    let f = etsvd_factors(&ht, tol, None)?;
    let zr_m = forward.data.psi_unfold();
    let zo_m = adjoint.data.psi_unfold();
    project_balanced(
        sys,
        &zr_m,
        &zo_m,
        &f.left,
        &f.sigmas,
        &f.right,
        order,
        ReductionMethod::Hobpod,
    )
}

/// Markov parameters of a system folded back to output shape x input shape.
pub fn markov_tensors(sys: &MltiSystem, count: usize) -> Result<Vec<PairedTensor>> {
    let out_shape = sys.output_shape();
    let in_shape = sys.input_shape();
    markov_parameters(sys, count)?
        .into_iter()
        .map(|m| PairedTensor::psi_fold(&m.view(), out_shape.clone(), in_shape.clone()))
        .collect()
}

/// Block Hankel tensor: block (r, c) holds markov[shift + r + c], rows
/// blocked over the lag factorization, columns over the horizon one.
fn hankel_block(
    markov: &[PairedTensor],
    shift: usize,
    t_fact: &Factorization,
    l_fact: &Factorization,
) -> Result<PairedTensor> {
    let rows = l_fact.total();
    let cols = t_fact.total();
    let mut row_blocks = Vec::with_capacity(rows);
    for r in 0..rows {
        let blocks: Vec<PairedTensor> = (0..cols).map(|c| markov[shift + r + c].clone()).collect();
        row_blocks.push(PairedTensor::block_row(&blocks, t_fact)?);
    }
    PairedTensor::block_col(&row_blocks, l_fact)
}

/// Eigensystem realization from impulse-response data: decompose the block
/// Hankel tensor, truncate its unfolding SVD at the requested order, and
/// read the realization off the shifted Hankel.
pub fn hoera(
    markov: &[PairedTensor],
    t_fact: &Factorization,
    l_fact: &Factorization,
    order: usize,
    tol: f64,
) -> Result<ReducedModel> {
    let first = markov
        .first()
        .ok_or_else(|| Error::InsufficientData("no impulse-response snapshots".into()))?;
    let input = first.col_shape().clone();
    let output = first.row_shape().clone();
    t_fact.check_order(&input)?;
    l_fact.check_order(&output)?;
    let needed = t_fact.total() + l_fact.total();
    if markov.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{} impulse-response snapshots given, {} needed for the requested horizons",
            markov.len(),
            needed
        )));
    }
    let h = hankel_block(markov, 0, t_fact, l_fact)?;
    let h1 = hankel_block(markov, 1, t_fact, l_fact)?;
    let ht = PairedTensorTrain::decompose(&h, tol * 1e-2, None)?;
    let f = etsvd_factors(&ht, tol, None)?;
    let available = numerical_rank(&f.sigmas);
    if order > available {
        return Err(Error::InsufficientRank {
            requested: order,
            available,
        });
    }
    if order == 0 {
        return zero_model(&input, &output, &f.sigmas, ReductionMethod::Hoera);
    }
    let retained = f.sigmas[..order].to_vec();
    let si: Vec<f64> = retained.iter().map(|&s| 1.0 / s.sqrt()).collect();
    let u_s = f.left.slice(s![.., ..order]).to_owned();
    let v_s = f.right.slice(s![.., ..order]).to_owned();
    let mut ar = u_s.t().dot(&h1.psi_unfold()).dot(&v_s);
    for i in 0..order {
        for j in 0..order {
            ar[[i, j]] *= si[i] * si[j];
        }
    }
    let col_first = h.extract_block(t_fact, 0)?.psi_unfold();
    let mut br = u_s.t().dot(&col_first);
    for (i, &w) in si.iter().enumerate() {
        br.row_mut(i).mapv_inplace(|x| x * w);
    }
    let row_first = h.extract_block_col(l_fact, 0)?.psi_unfold();
    let mut cr = row_first.dot(&v_s);
    for (j, &w) in si.iter().enumerate() {
        cr.column_mut(j).mapv_inplace(|x| x * w);
    }
    finish_model(
        &input,
        &output,
        ar,
        br,
        cr,
        retained,
        f.sigmas,
        ReductionMethod::Hoera,
    )
}

/// First differences of step-response samples. A step response started from
/// a zero state begins with a zero sample, so the differences recover the
/// impulse response from its first parameter on.
pub fn step_to_impulse(steps: &[PairedTensor]) -> Result<Vec<PairedTensor>> {
    if steps.len() < 2 {
        return Err(Error::InsufficientData(
            "step responses need at least two samples to difference".into(),
        ));
    }
    let mut out = Vec::with_capacity(steps.len() - 1);
    for k in 1..steps.len() {
        let mut prev = steps[k - 1].clone();
        prev.scale(-1.0);
        out.push(steps[k].add(&prev)?);
    }
    Ok(out)
}

/// A reduced realization at the matrix level, used both as the baseline
/// oracle for the tensor pipelines and for scalar identification.
#[derive(Debug, Clone)]
pub struct MatrixRealization {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub c: Array2<f64>,
    pub sigmas: Vec<f64>,
    pub all_sigmas: Vec<f64>,
}

impl MatrixRealization {
    /// Markov parameters C A^k B for k = 0..count.
    pub fn markov(&self, count: usize) -> Vec<Array2<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut akb = self.b.clone();
        for _ in 0..count {
            out.push(self.c.dot(&akb));
            akb = self.a.dot(&akb);
        }
        out
    }
}

fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Crude spectral-radius estimate by normalized power iteration, cheap
/// enough to gate the doubling loop when exact eigenvalues are too slow.
fn dense_power_radius(a: &ArrayView2<f64>, iters: usize) -> f64 {
    let n = a.nrows();
    let mut v = ndarray::Array1::from_shape_fn(n, |i| {
        ((i as f64 + 1.0) * 0.7391).sin() + 0.1
    });
    let norm0 = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm0);
    let mut rho: f64 = 0.0;
    for _ in 0..iters {
        let w = a.dot(&v);
        let nrm = w.dot(&w).sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return nrm;
        }
        rho = nrm;
        v = w.mapv(|x| x / nrm);
    }
    rho
}

/// Drop columns of a thin gramian factor that carry no weight; Z Z^T is
/// preserved up to the singular-value floor.
fn compress_factor(z: Array2<f64>, cap: usize) -> Result<Array2<f64>> {
    if z.ncols() <= cap {
        return Ok(z);
    }
    let (u, sig, _) = linalg::svd_econ(&z)?;
    let keep = numerical_rank(&sig).max(1);
    let mut out = u.slice(s![.., ..keep]).to_owned();
    for (j, &s_j) in sig[..keep].iter().enumerate() {
        out.column_mut(j).mapv_inplace(|x| x * s_j);
    }
    Ok(out)
}

const EXACT_RADIUS_CAP: usize = 1024;

/// Standard matrix balanced truncation in square-root form: doubling
/// accumulation of the gramian Cholesky-like factors, Hankel SVD of their
/// cross product, oblique projection.
pub fn bt_matrix(
    a: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
    c: &ArrayView2<f64>,
    order: usize,
) -> Result<MatrixRealization> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n {
        return Err(Error::ShapeMismatch(
            "balanced truncation of mismatched system matrices".into(),
        ));
    }
    let rho = if n <= EXACT_RADIUS_CAP {
        linalg::spectral_radius(&a.to_owned())?
    } else {
        dense_power_radius(a, 200)
    };
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let mut zr = b.to_owned();
    let mut zo = c.t().to_owned();
    let mut ak = a.to_owned();
    let mut converged = false;
    for _ in 0..60 {
        let pr = ak.dot(&zr);
        let po = ak.t().dot(&zo);
        let growth = frob(&pr) + frob(&po);
        zr = ndarray::concatenate(Axis(1), &[zr.view(), pr.view()])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        zo = ndarray::concatenate(Axis(1), &[zo.view(), po.view()])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        zr = compress_factor(zr, 256)?;
        zo = compress_factor(zo, 256)?;
        if growth <= 1e-8 * (frob(&zr) + frob(&zo)) {
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
    let h = zo.t().dot(&zr);
    let (u, sig, vt) = linalg::svd_econ(&h)?;
    let available = numerical_rank(&sig);
    if order > available {
        return Err(Error::InsufficientRank {
            requested: order,
            available,
        });
    }
    let retained = sig[..order].to_vec();
    let v = vt.t().to_owned();
    let mut pt = zr.dot(&v.slice(s![.., ..order]));
    let mut qt = zo.dot(&u.slice(s![.., ..order]));
    for (j, &s_j) in retained.iter().enumerate() {
        let w = 1.0 / s_j.sqrt();
        pt.column_mut(j).mapv_inplace(|x| x * w);
        qt.column_mut(j).mapv_inplace(|x| x * w);
    }
    Ok(MatrixRealization {
        a: qt.t().dot(&a.dot(&pt)),
        b: qt.t().dot(b),
        c: c.dot(&pt),
        sigmas: retained,
        all_sigmas: sig,
    })
}

/// Standard matrix ERA on p x m Markov parameter blocks.
pub fn era_matrix(
    markov: &[Array2<f64>],
    t: usize,
    l: usize,
    order: usize,
) -> Result<MatrixRealization> {
    let first = markov
        .first()
        .ok_or_else(|| Error::InsufficientData("no Markov parameters".into()))?;
    let (p_dim, m_dim) = first.dim();
    let needed = t + l + 2;
    if markov.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{} Markov parameters given, {} needed for the requested horizons",
            markov.len(),
            needed
        )));
    }
    let rows = l + 1;
    let cols = t + 1;
    let build = |shift: usize| {
        let mut h = Array2::zeros((rows * p_dim, cols * m_dim));
        for r in 0..rows {
            for c in 0..cols {
                h.slice_mut(s![r * p_dim..(r + 1) * p_dim, c * m_dim..(c + 1) * m_dim])
                    .assign(&markov[shift + r + c]);
            }
        }
        h
    };
    let h = build(0);
    let h1 = build(1);
    let (u, sig, vt) = linalg::svd_econ(&h)?;
    let available = numerical_rank(&sig);
    if order > available {
        return Err(Error::InsufficientRank {
            requested: order,
            available,
        });
    }
    let retained = sig[..order].to_vec();
    let si: Vec<f64> = retained.iter().map(|&s| 1.0 / s.sqrt()).collect();
    let u_s = u.slice(s![.., ..order]).to_owned();
    let v_s = vt.slice(s![..order, ..]).t().to_owned();
    let mut ar = u_s.t().dot(&h1).dot(&v_s);
    for i in 0..order {
        for j in 0..order {
            ar[[i, j]] *= si[i] * si[j];
        }
    }
    let mut br = u_s.t().dot(&h.slice(s![.., ..m_dim]));
    for (i, &w) in si.iter().enumerate() {
        br.row_mut(i).mapv_inplace(|x| x * w);
    }
    let mut cr = h.slice(s![..p_dim, ..]).dot(&v_s);
    for (j, &w) in si.iter().enumerate() {
        cr.column_mut(j).mapv_inplace(|x| x * w);
    }
    Ok(MatrixRealization {
        a: ar,
        b: br,
        c: cr,
        sigmas: retained,
        all_sigmas: sig,
    })
}

/// Hankel matrix of a scalar signal: entry (i, j) = signal[i + j + shift].
pub fn hankel_matrix(signal: &[f64], rows: usize, cols: usize, shift: usize) -> Result<Array2<f64>> {
    if rows == 0 || cols == 0 || signal.len() < rows + cols - 1 + shift {
        return Err(Error::InsufficientData(format!(
            "signal of {} samples cannot fill a {rows} x {cols} Hankel matrix at shift {shift}",
            signal.len()
        )));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(i, j)| {
        signal[i + j + shift]
    }))
}

/// Identify a scalar realization from an impulse-response signal: the
/// largest square power-of-two Hankel matrix the signal fills is quantized,
/// its singular triples computed in train form, and the realization read off
/// the shifted Hankel. The quantized unfolding equals the original matrix,
/// so the result matches the dense path at the same order.
pub fn identify_scalar(signal: &[f64], order: usize, tol: f64) -> Result<MatrixRealization> {
    if signal.len() < 4 {
        return Err(Error::InsufficientData(
            "scalar identification needs at least four samples".into(),
        ));
    }
    let size = 1usize << (signal.len() / 2).ilog2();
    identify_scalar_hankel(signal, size, size, order, tol)
}

/// Rectangular variant: the signal fills a rows x cols Hankel matrix whose
/// sides are factored into size-2 modes before the train-format SVD.
pub fn identify_scalar_hankel(
    signal: &[f64],
    rows: usize,
    cols: usize,
    order: usize,
    tol: f64,
) -> Result<MatrixRealization> {
    let h = hankel_matrix(signal, rows, cols, 0)?;
    let h1 = hankel_matrix(signal, rows, cols, 1)?;
    let hp = PairedTensor::psi_fold(&h.view(), Shape::new(vec![rows])?, Shape::new(vec![cols])?)?;
    let plan = QuantizationPlan::auto(hp.row_shape(), hp.col_shape())?;
    let qt = quantize(&hp, &plan, tol * 1e-2, None)?;
    let f = etsvd_factors(&qt, tol, None)?;
    let available = numerical_rank(&f.sigmas);
    if order > available {
        return Err(Error::InsufficientRank {
            requested: order,
            available,
        });
    }
    let retained = f.sigmas[..order].to_vec();
    let si: Vec<f64> = retained.iter().map(|&s| 1.0 / s.sqrt()).collect();
    let u_s = f.left.slice(s![.., ..order]).to_owned();
    let v_s = f.right.slice(s![.., ..order]).to_owned();
    let mut ar = u_s.t().dot(&h1).dot(&v_s);
    for i in 0..order {
        for j in 0..order {
            ar[[i, j]] *= si[i] * si[j];
        }
    }
    let mut br = u_s.t().dot(&h.slice(s![.., ..1]));
    for (i, &w) in si.iter().enumerate() {
        br.row_mut(i).mapv_inplace(|x| x * w);
    }
    let mut cr = h.slice(s![..1, ..]).dot(&v_s);
    for (j, &w) in si.iter().enumerate() {
        cr.column_mut(j).mapv_inplace(|x| x * w);
    }
    Ok(MatrixRealization {
        a: ar,
        b: br,
        c: cr,
        sigmas: retained,
        all_sigmas: f.sigmas,
    })
}

//! Discrete-time multilinear systems x_{k+1} = A * x_k + B * u_k,
//! y_k = C * x_k, with operators held densely or as trains. Includes
//! simulation, Markov parameters, transfer function evaluation, the 2-D
//! heat benchmark, and seeded random stable system generators.

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg;
use crate::paired::PairedTensor;
use crate::shape::Shape;
use crate::train::{power_radius, PairedTensorTrain, TensorTrain};
use ndarray::prelude::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A paired-tensor operator in dense or train form.
#[derive(Debug, Clone)]
pub enum Operator {
    Dense(PairedTensor),
    Train(PairedTensorTrain),
}

impl Operator {
    pub fn row_shape(&self) -> Shape {
        match self {
            Operator::Dense(p) => p.row_shape().clone(),
            Operator::Train(t) => t.row_shape(),
        }
    }

    pub fn col_shape(&self) -> Shape {
        match self {
            Operator::Dense(p) => p.col_shape().clone(),
            Operator::Train(t) => t.col_shape(),
        }
    }

    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        match self {
            Operator::Dense(p) => p.apply(x),
            Operator::Train(t) => t.apply_dense(x),
        }
    }

    /// Unfolding matrix; train operators are materialized under the dense
    /// capacity budget.
    pub fn psi(&self) -> Result<Array2<f64>> {
        match self {
            Operator::Dense(p) => Ok(p.psi_unfold()),
            Operator::Train(t) => Ok(t.reconstruct()?.psi_unfold()),
        }
    }

    pub fn to_train(&self, tol: f64, max_rank: Option<usize>) -> Result<PairedTensorTrain> {
        match self {
            Operator::Dense(p) => PairedTensorTrain::decompose(p, tol, max_rank),
            Operator::Train(t) => Ok(t.clone()),
        }
    }

    pub fn to_dense(&self) -> Result<PairedTensor> {
        match self {
            Operator::Dense(p) => Ok(p.clone()),
            Operator::Train(t) => t.reconstruct(),
        }
    }

    pub fn transpose(&self) -> Operator {
        match self {
            Operator::Dense(p) => Operator::Dense(p.u_transpose()),
            Operator::Train(t) => Operator::Train(t.transpose()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MltiSystem {
    pub a: Operator,
    pub b: Operator,
    pub c: Operator,
}

impl MltiSystem {
    pub fn new(a: Operator, b: Operator, c: Operator) -> Result<Self> {
        let sys = MltiSystem { a, b, c };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.row_shape() != self.a.col_shape() {
            return Err(Error::ShapeMismatch("state operator must be square".into()));
        }
        if self.b.row_shape() != self.a.row_shape() {
            return Err(Error::ShapeMismatch(
                "input operator rows must match the state shape".into(),
            ));
        }
        if self.c.col_shape() != self.a.row_shape() {
            return Err(Error::ShapeMismatch(
                "output operator columns must match the state shape".into(),
            ));
        }
        Ok(())
    }

    pub fn state_shape(&self) -> Shape {
        self.a.row_shape()
    }

    pub fn input_shape(&self) -> Shape {
        self.b.col_shape()
    }

    pub fn output_shape(&self) -> Shape {
        self.c.row_shape()
    }

    pub fn state_dim(&self) -> usize {
        self.state_shape().total()
    }

    pub fn input_dim(&self) -> usize {
        self.input_shape().total()
    }

    pub fn output_dim(&self) -> usize {
        self.output_shape().total()
    }

    /// Convert all three operators to train form.
    pub fn to_train(&self, tol: f64, max_rank: Option<usize>) -> Result<MltiSystem> {
        Ok(MltiSystem {
            a: Operator::Train(self.a.to_train(tol, max_rank)?),
            b: Operator::Train(self.b.to_train(tol, max_rank)?),
            c: Operator::Train(self.c.to_train(tol, max_rank)?),
        })
    }
}

/// The adjoint system (A^T, C^T, B^T): inputs drive the old output ports and
/// outputs read the old input ports.
pub fn adjoint_system(sys: &MltiSystem) -> Result<MltiSystem> {
    MltiSystem::new(
        sys.a.transpose(),
        sys.c.transpose(),
        sys.b.transpose(),
    )
}

/// Run the recursion with dense states. Input row k holds the linearized
/// channels of u_k; output row k holds y_k = C * x_k.
pub fn simulate(
    sys: &MltiSystem,
    x0: Option<&DenseTensor>,
    u: &ArrayView2<f64>,
) -> Result<Array2<f64>> {
    sys.validate()?;
    let state_shape = sys.state_shape();
    let input_shape = sys.input_shape();
    if u.ncols() != input_shape.total() {
        return Err(Error::ShapeMismatch(format!(
            "input rows of width {} for input dimension {}",
            u.ncols(),
            input_shape.total()
        )));
    }
    let mut x = match x0 {
        Some(x0) => {
            if x0.shape() != &state_shape {
                return Err(Error::ShapeMismatch(
                    "initial state does not match the state shape".into(),
                ));
            }
            x0.clone()
        }
        None => DenseTensor::zeros(state_shape.clone()),
    };
    let steps = u.nrows();
    let mut y = Array2::zeros((steps, sys.output_dim()));
    for k in 0..steps {
        let yk = sys.c.apply(&x)?;
        y.row_mut(k).assign(&Array1::from_vec(yk.data().to_vec()));
        let uk = DenseTensor::new(input_shape.clone(), u.row(k).to_vec())?;
        let bu = sys.b.apply(&uk)?;
        x = sys.a.apply(&x)?.add(&bu)?;
    }
    Ok(y)
}

/// Same recursion with the state kept as a train and rounded each step.
/// Returns the outputs and the largest interior state rank seen at each
/// step.
pub fn simulate_tt(
    sys: &MltiSystem,
    x0: Option<&TensorTrain>,
    u: &ArrayView2<f64>,
    tol: f64,
    max_rank: Option<usize>,
) -> Result<(Array2<f64>, Vec<usize>)> {
    sys.validate()?;
    let a = sys.a.to_train(0.0, None)?;
    let b = sys.b.to_train(0.0, None)?;
    let c = sys.c.to_train(0.0, None)?;
    let state_shape = sys.state_shape();
    let input_shape = sys.input_shape();
    if u.ncols() != input_shape.total() {
        return Err(Error::ShapeMismatch(format!(
            "input rows of width {} for input dimension {}",
            u.ncols(),
            input_shape.total()
        )));
    }
    let mut x = match x0 {
        Some(t) => t.clone(),
        None => {
            let cores = state_shape
                .sizes()
                .iter()
                .map(|&j| Array3::zeros((1, j, 1)))
                .collect();
            TensorTrain::from_cores(cores)?
        }
    };
    let steps = u.nrows();
    let mut y = Array2::zeros((steps, sys.output_dim()));
    let mut ranks = Vec::with_capacity(steps);
    for k in 0..steps {
        let yk = c.apply_tt(&x)?.reconstruct()?;
        y.row_mut(k).assign(&Array1::from_vec(yk.data().to_vec()));
        let uk = DenseTensor::new(input_shape.clone(), u.row(k).to_vec())?;
        let u_tt = TensorTrain::decompose(&uk, 0.0, None)?;
        let bu = b.apply_tt(&u_tt)?;
        let mut next = a.apply_tt(&x)?.add(&bu)?;
        next.round(tol, max_rank)?;
        x = next;
        ranks.push(x.ranks().into_iter().max().unwrap_or(1));
    }
    Ok((y, ranks))
}

/// Markov parameters h_k = C * A^k * B for k = 0..count-1 as unfolded
/// (output x input) matrices, computed by propagating dense columns.
pub fn markov_parameters(sys: &MltiSystem, count: usize) -> Result<Vec<Array2<f64>>> {
    sys.validate()?;
    let m = sys.input_dim();
    let p = sys.output_dim();
    let input_shape = sys.input_shape();
    let mut columns: Vec<DenseTensor> = Vec::with_capacity(m);
    for ch in 0..m {
        let mut e = vec![0.0; m];
        e[ch] = 1.0;
        let u = DenseTensor::new(input_shape.clone(), e)?;
        columns.push(sys.b.apply(&u)?);
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut h = Array2::zeros((p, m));
        for (ch, x) in columns.iter().enumerate() {
            let yk = sys.c.apply(x)?;
            for (r, &v) in yk.data().iter().enumerate() {
                h[[r, ch]] = v;
            }
        }
        out.push(h);
        for x in &mut columns {
            *x = sys.a.apply(x)?;
        }
    }
    Ok(out)
}

/// Transfer function G(z) = C (z I - A)^{-1} B at one complex point, as an
/// (output x input) matrix.
pub fn transfer_eval(sys: &MltiSystem, z: Complex64) -> Result<Array2<Complex64>> {
    sys.validate()?;
    let am = sys.a.psi()?;
    let bm = sys.b.psi()?;
    let cm = sys.c.psi()?;
    let n = am.nrows();
    let mut zi_a = Array2::<Complex64>::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            zi_a[[r, c]] = -Complex64::new(am[[r, c]], 0.0);
        }
        zi_a[[r, r]] += z;
    }
    let b_c = bm.mapv(|v| Complex64::new(v, 0.0));
    let x = linalg::solve_complex(&zi_a, &b_c)?;
    let c_c = cm.mapv(|v| Complex64::new(v, 0.0));
    Ok(c_c.dot(&x))
}

/// Largest transfer function gain over `samples` equispaced points of the
/// unit circle (including z = 1).
pub fn hinf_estimate(sys: &MltiSystem, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidConfig("no frequency samples".into()));
    }
    let mut best = 0.0f64;
    for k in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let z = Complex64::new(theta.cos(), theta.sin());
        let g = transfer_eval(sys, z)?;
        best = best.max(linalg::sigma_max_complex(&g)?);
    }
    Ok(best)
}

/// Difference system whose transfer function is G_1 - G_2, for comparing a
/// reduced model against its source. Requires matching input and output
/// dimensions; states are stacked along one flattened mode.
pub fn difference_system(sys1: &MltiSystem, sys2: &MltiSystem) -> Result<MltiSystem> {
    if sys1.input_dim() != sys2.input_dim() || sys1.output_dim() != sys2.output_dim() {
        return Err(Error::ShapeMismatch(
            "difference of systems with different port dimensions".into(),
        ));
    }
    let n1 = sys1.state_dim();
    let n2 = sys2.state_dim();
    let m = sys1.input_dim();
    let p = sys1.output_dim();
    let a1 = sys1.a.psi()?;
    let a2 = sys2.a.psi()?;
    let mut am = Array2::zeros((n1 + n2, n1 + n2));
    am.slice_mut(s![..n1, ..n1]).assign(&a1);
    am.slice_mut(s![n1.., n1..]).assign(&a2);
    let mut bm = Array2::zeros((n1 + n2, m));
    bm.slice_mut(s![..n1, ..]).assign(&sys1.b.psi()?);
    bm.slice_mut(s![n1.., ..]).assign(&sys2.b.psi()?);
    let mut cm = Array2::zeros((p, n1 + n2));
    cm.slice_mut(s![.., ..n1]).assign(&sys1.c.psi()?);
    let c2 = sys2.c.psi()?.mapv(|v| -v);
    cm.slice_mut(s![.., n1..]).assign(&c2);
    let state = Shape::new(vec![n1 + n2])?;
    let input = Shape::new(vec![m])?;
    let output = Shape::new(vec![p])?;
    MltiSystem::new(
        Operator::Dense(PairedTensor::psi_fold(&am.view(), state.clone(), state.clone())?),
        Operator::Dense(PairedTensor::psi_fold(&bm.view(), state.clone(), input)?),
        Operator::Dense(PairedTensor::psi_fold(&cm.view(), output, state)?),
    )
}

/// Configuration of the 2-D heat benchmark on (-pi, pi)^2 with a Dirichlet
/// boundary, explicit Euler steps, a point actuator at the node nearest the
/// origin, and a point sensor at the node nearest (1.0, 0.5).
#[derive(Debug, Clone)]
pub struct HeatConfig {
    /// Interior grid points per axis.
    pub grid_n: usize,
    /// Squared wave/diffusion coefficient.
    pub c2: f64,
    /// Time step.
    pub dt: f64,
}

pub const HEAT_SENSOR_POINT: (f64, f64) = (1.0, 0.5);

impl HeatConfig {
    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.grid_n as f64 + 1.0)
    }

    /// Stability ratio c^2 dt / h^2.
    pub fn ratio(&self) -> f64 {
        self.c2 * self.dt / (self.h() * self.h())
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 3 {
            return Err(Error::InvalidConfig(
                "heat grid needs at least 3 interior points per axis".into(),
            ));
        }
        if !(self.c2 > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(
                "heat coefficients must be positive".into(),
            ));
        }
        if self.ratio() >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "explicit step ratio {} violates the stability bound 1",
                self.ratio()
            )));
        }
        Ok(())
    }

    fn coordinate(&self, i: usize) -> f64 {
        -std::f64::consts::PI + (i as f64 + 1.0) * self.h()
    }

    /// Index of the grid node nearest `target` along one axis, breaking
    /// distance ties toward the more negative coordinate.
    fn nearest(&self, target: f64) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..self.grid_n {
            let d = (self.coordinate(i) - target).abs();
            if d + 1e-15 < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn actuator_index(&self) -> (usize, usize) {
        (self.nearest(0.0), self.nearest(0.0))
    }

    pub fn sensor_index(&self) -> (usize, usize) {
        (self.nearest(HEAT_SENSOR_POINT.0), self.nearest(HEAT_SENSOR_POINT.1))
    }
}

/// Explicit-Euler heat system with dense operators: A = I + r * Laplacian,
/// B a point source of weight 1/h^2, C a point sensor.
pub fn heat_system(cfg: &HeatConfig) -> Result<MltiSystem> {
    cfg.validate()?;
    let g = cfg.grid_n;
    let r = cfg.ratio();
    let n = g * g;
    let mut am = Array2::<f64>::zeros((n, n));
    for j in 0..g {
        for i in 0..g {
            let row = i + g * j;
            am[[row, row]] = 1.0 - 4.0 * r;
            if i + 1 < g {
                am[[row, (i + 1) + g * j]] = r;
            }
            if i >= 1 {
                am[[row, (i - 1) + g * j]] = r;
            }
            if j + 1 < g {
                am[[row, i + g * (j + 1)]] = r;
            }
            if j >= 1 {
                am[[row, i + g * (j - 1)]] = r;
            }
        }
    }
    let state = Shape::new(vec![g, g])?;
    let scalar = Shape::new(vec![1, 1])?;
    let a = PairedTensor::psi_fold(&am.view(), state.clone(), state.clone())?;

    let (ai, aj) = cfg.actuator_index();
    let mut bm = Array2::<f64>::zeros((n, 1));
    bm[[ai + g * aj, 0]] = 1.0 / (cfg.h() * cfg.h());
    let b = PairedTensor::psi_fold(&bm.view(), state.clone(), scalar.clone())?;

    let (si, sj) = cfg.sensor_index();
    let mut cm = Array2::<f64>::zeros((1, n));
    cm[[0, si + g * sj]] = 1.0;
    let c = PairedTensor::psi_fold(&cm.view(), scalar, state)?;

    MltiSystem::new(Operator::Dense(a), Operator::Dense(b), Operator::Dense(c))
}

/// Heat system with all operators decomposed into trains over the two grid
/// modes. The state operator separates mode-wise with interior rank 3.
pub fn heat_system_train(cfg: &HeatConfig, tol: f64) -> Result<MltiSystem> {
    heat_system(cfg)?.to_train(tol, None)
}

/// Random system with a dense state operator rescaled so its spectral
/// radius is exactly 1 - margin.
pub fn random_stable_system(
    state: &Shape,
    input: &Shape,
    output: &Shape,
    margin: f64,
    seed: u64,
) -> Result<MltiSystem> {
    if !(0.0..1.0).contains(&margin) || margin == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "stability margin {} outside (0, 1)",
            margin
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = PairedTensor::from_fn(state.clone(), state.clone(), |_, _| {
        rng.gen_range(-1.0..1.0)
    })?;
    let rho = linalg::spectral_radius(&a.psi_unfold())?;
    if rho == 0.0 {
        return Err(Error::Numerical("nilpotent random draw".into()));
    }
    a.scale((1.0 - margin) / rho);
    let b = PairedTensor::from_fn(state.clone(), input.clone(), |_, _| {
        rng.gen_range(-1.0..1.0)
    })?;
    let c = PairedTensor::from_fn(output.clone(), state.clone(), |_, _| {
        rng.gen_range(-1.0..1.0)
    })?;
    MltiSystem::new(Operator::Dense(a), Operator::Dense(b), Operator::Dense(c))
}

/// Random single-input single-output system over an N-mode binary state
/// shape, built directly in train form with the given interior ranks and
/// rescaled by a power-iteration radius estimate. Never materializes the
/// unfolded state operator, so it scales to large N.
pub fn random_stable_tt_system(
    n_modes: usize,
    rank: usize,
    margin: f64,
    seed: u64,
) -> Result<MltiSystem> {
    if n_modes == 0 {
        return Err(Error::InvalidConfig("system needs at least one mode".into()));
    }
    let state = Shape::new(vec![2; n_modes])?;
    let ports = Shape::new(vec![1; n_modes])?;
    let interior = vec![rank; n_modes - 1];
    let a = PairedTensorTrain::random(&state, &state, &interior, seed)?;
    let rho = power_radius(&a, 80, 1e-10, 30, seed ^ 0x9e37_79b9)?;
    if rho == 0.0 {
        return Err(Error::Numerical("nilpotent random draw".into()));
    }
    let target = 1.0 - margin;
    // Spread the rescaling across cores to keep entries at a uniform scale.
    let per_core = (target / rho).powf(1.0 / n_modes as f64);
    let mut cores = a.cores().to_vec();
    for core in &mut cores {
        core.mapv_inplace(|v| v * per_core);
    }
    let mut a = PairedTensorTrain::from_cores(cores)?;
    // One verification pass; nudge down if the estimate was low.
    let mut check = power_radius(&a, 80, 1e-10, 30, seed ^ 0x51ed_270b)?;
    let mut guard = 0;
    while check >= 1.0 - margin / 2.0 && guard < 8 {
        a.scale((1.0 - margin) / check);
        check = power_radius(&a, 80, 1e-10, 30, seed ^ (0x2545_f491 + guard))?;
        guard += 1;
    }
    let b = PairedTensorTrain::random(&state, &ports, &vec![1; n_modes - 1], seed ^ 0xb5e1)?;
    let c = PairedTensorTrain::random(&ports, &state, &vec![1; n_modes - 1], seed ^ 0xc0de)?;
    MltiSystem::new(
        Operator::Train(a),
        Operator::Train(b),
        Operator::Train(c),
    )
}

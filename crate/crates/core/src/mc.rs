//! Monte Carlo cross-check of the stationary filter covariance.
//!
//! Means and symmetrised covariances of a linear quantum system obey the
//! same equations as a classical linear SDE driven by Gaussian noise of
//! covariance `Re(Θ) dt`, so the classical analog is enough to test them. It
//! cannot test anything beyond the first two moments.
//!
//! Each trajectory draws from its own ChaCha stream `(seed, index)`, so
//! results do not depend on how trajectories are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::filter::{FilterGain, StationaryFilter};
use crate::gaussian::{Mat, SystemModel};
use crate::linalg::{psd_sqrt, spectral_abscissa};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("drift is not Hurwitz (max real eigenvalue {0:e})")]
    Unstable(f64),
    #[error("step too large: ‖A‖·dt = {0} (must be below 0.1)")]
    StepTooLarge(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

/// Column-major dense matrix for the inner loops.
#[derive(Debug, Clone)]
struct Dense {
    rows: usize,
    data: Vec<f64>,
}

impl Dense {
    fn from(m: &Mat) -> Self {
        Self {
            rows: m.nrows(),
            data: m.as_slice().to_vec(),
        }
    }

    /// `out = self · v`
    #[inline]
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.mul_add(v, 1.0, out);
    }

    /// `out += scale · self · v`
    #[inline]
    fn mul_add(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        let out = &mut out[..self.rows];
        for (col, &vj) in self.data.chunks_exact(self.rows).zip(v) {
            let s = scale * vj;
            for (o, a) in out.iter_mut().zip(col) {
                *o += a * s;
            }
        }
    }
}

/// Classical analog state and filter estimate at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub x: Vec<f64>,
    pub pi: Vec<f64>,
    pub t: f64,
}

/// Sampled path of a `dim`-vector at times `k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub dt: f64,
    pub dim: usize,
    data: Vec<f64>,
}

impl StatePath {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.at(self.len() - 1)
    }
}

/// Measurement increments `dy_k` over `[k dt, (k+1) dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub dt: f64,
    pub seed: u64,
    pub outputs: usize,
    dy: Vec<f64>,
    /// Applied control `u_k`, `inputs` values per step; empty means zero.
    pub du: Vec<f64>,
}

impl MeasurementRecord {
    pub fn steps(&self) -> usize {
        self.dy.len() / self.outputs
    }

    pub fn dy(&self, k: usize) -> &[f64] {
        &self.dy[k * self.outputs..(k + 1) * self.outputs]
    }

    /// Overwrites `dy` with a caller-supplied sequence (testing hook).
    pub fn with_increments(mut self, dy: Vec<f64>) -> Result<Self, McError> {
        if dy.len() != self.dy.len() {
            return Err(McError::Dimension(format!("{} increments for {} slots", dy.len(), self.dy.len())));
        }
        self.dy = dy;
        Ok(self)
    }
}

/// Sources of randomness for a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub index: u64,
}

fn check_simulable(sys: &SystemModel, dt: f64) -> Result<(), McError> {
    let drift = sys.drift();
    let abscissa = spectral_abscissa(&drift);
    if !(abscissa < 0.0) {
        return Err(McError::Unstable(abscissa));
    }
    let norm = drift.norm();
    if !(norm * dt < 0.1) {
        return Err(McError::StepTooLarge(norm * dt));
    }
    Ok(())
}

/// Lower-triangular factor `L` with `L Lᵀ = m`; eigen square root when `m`
/// is only semidefinite. Columns that vanish are dropped, so no random
/// numbers are spent on them.
fn noise_factor(m: &Mat) -> Mat {
    let full = match m.clone().cholesky() {
        Some(ch) => ch.l(),
        None => psd_sqrt(m),
    };
    let keep: Vec<usize> = (0..full.ncols()).filter(|&j| full.column(j).amax() > 0.0).collect();
    Mat::from_fn(full.nrows(), keep.len(), |i, j| full[(i, keep[j])])
}

/// Precomputed Euler–Maruyama step of the classical analog:
/// `[x'; dy] = M [x; z; z_bath]` with standard normal `z`, `z_bath`.
struct Kernel {
    dim: usize,
    outputs: usize,
    noise: usize,
    m: Dense,
    input: Vec<f64>,
    output: Vec<f64>,
}

impl Kernel {
    fn new(sys: &SystemModel, dt: f64) -> Result<Self, McError> {
        check_simulable(sys, dt)?;
        let (dim, ell) = (sys.state_dim(), sys.outputs());
        let sqrt_dt = dt.sqrt();
        let noise_root = noise_factor(sys.noise.re());
        let bath_root = noise_factor(&sys.extra_diffusion);
        let (nz, nb) = (noise_root.ncols(), bath_root.ncols());
        let mut m = Mat::zeros(dim + ell, dim + nz + nb);
        m.view_mut((0, 0), (dim, dim))
            .copy_from(&(Mat::identity(dim, dim) + sys.drift() * dt));
        m.view_mut((0, dim), (dim, nz)).copy_from(&(&sys.b * &noise_root * sqrt_dt));
        m.view_mut((0, dim + nz), (dim, nb)).copy_from(&(bath_root * sqrt_dt));
        m.view_mut((dim, 0), (ell, dim)).copy_from(&(&sys.c * dt));
        m.view_mut((dim, dim), (ell, nz)).copy_from(&(&sys.d * &noise_root * sqrt_dt));
        Ok(Self {
            dim,
            outputs: ell,
            noise: nz + nb,
            input: vec![0.0; dim + nz + nb],
            output: vec![0.0; dim + ell],
            m: Dense::from(&m),
        })
    }

    fn rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    /// `x₀ ~ N(0, ½I)`.
    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim)
            .map(|_| std::f64::consts::FRAC_1_SQRT_2 * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect()
    }

    /// Advances `x` in place and writes `dy`.
    #[inline]
    fn step(&mut self, rng: &mut ChaCha8Rng, x: &mut [f64], dy: &mut [f64]) {
        let dim = self.dim;
        for v in self.input[dim..dim + self.noise].iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        self.advance(x, dy);
    }

    /// As [`Kernel::step`] with the standard normals supplied.
    fn step_with(&mut self, z: &[f64], x: &mut [f64], dy: &mut [f64]) {
        let dim = self.dim;
        self.input[dim..dim + self.noise].copy_from_slice(z);
        self.advance(x, dy);
    }

    #[inline]
    fn advance(&mut self, x: &mut [f64], dy: &mut [f64]) {
        let dim = self.dim;
        self.input[..dim].copy_from_slice(x);
        self.m.apply(&self.input, &mut self.output);
        x.copy_from_slice(&self.output[..dim]);
        dy.copy_from_slice(&self.output[dim..dim + self.outputs]);
    }
}

/// Explicit filter step `π' = π + Aπ dt + K(dy − Cπ dt)`, stored as
/// `π' = Φπ + K dy` with `Φ = I + (A − KC) dt`.
struct FilterKernel {
    dt: f64,
    phi: Dense,
    c: Dense,
    k: Dense,
    next: Vec<f64>,
}

impl FilterKernel {
    fn new(sys: &SystemModel, k: &Mat, dt: f64) -> Self {
        let dim = sys.state_dim();
        let phi = Mat::identity(dim, dim) + (sys.drift() - k * &sys.c) * dt;
        Self {
            dt,
            phi: Dense::from(&phi),
            c: Dense::from(&sys.c),
            k: Dense::from(k),
            next: vec![0.0; dim],
        }
    }

    /// Advances `pi` and leaves the innovation `dy − Cπ dt` in `innov`.
    #[inline]
    fn step(&mut self, pi: &mut [f64], dy: &[f64], innov: &mut [f64]) {
        innov.copy_from_slice(dy);
        self.c.mul_add(pi, -self.dt, innov);
        self.phi.apply(pi, &mut self.next);
        self.k.mul_add(dy, 1.0, &mut self.next);
        pi.copy_from_slice(&self.next);
    }
}

/// Euler–Maruyama on `dx = A x dt + B dW + bath`, `dy = C x dt + D dW`, with
/// `x₀ ~ N(0, ½I)`.
pub fn simulate_trajectory(
    sys: &SystemModel,
    spec: &TrajectorySpec,
) -> Result<(StatePath, MeasurementRecord), McError> {
    let mut kernel = Kernel::new(sys, spec.dt)?;
    let (dim, ell) = (kernel.dim, kernel.outputs);
    let steps = (spec.horizon / spec.dt).round() as usize;
    let mut rng = Kernel::rng(spec.seed, spec.index);

    let mut states = Vec::with_capacity((steps + 1) * dim);
    let mut dy = vec![0.0; steps * ell];
    let mut x = kernel.initial_state(&mut rng);
    states.extend_from_slice(&x);
    for out in dy.chunks_exact_mut(ell) {
        kernel.step(&mut rng, &mut x, out);
        states.extend_from_slice(&x);
    }

    Ok((
        StatePath {
            dt: spec.dt,
            dim,
            data: states,
        },
        MeasurementRecord {
            dt: spec.dt,
            seed: spec.seed,
            outputs: ell,
            dy,
            du: Vec::new(),
        },
    ))
}

/// Single trajectory (stream 0) of the classical analog.
pub fn simulate_classical_analog(
    sys: &SystemModel,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<(StatePath, MeasurementRecord), McError> {
    simulate_trajectory(
        sys,
        &TrajectorySpec {
            horizon,
            dt,
            seed,
            index: 0,
        },
    )
}

/// Explicit discretisation of `dπ = Aπ dt + F u dt + K(dy − Cπ dt)` from
/// `π₀ = 0`.
pub fn run_filter(
    record: &MeasurementRecord,
    sys: &SystemModel,
    gain: &FilterGain,
) -> Result<StatePath, McError> {
    let dim = sys.state_dim();
    let k = gain.matrix();
    if record.outputs != sys.outputs() || k.shape() != (dim, sys.outputs()) {
        return Err(McError::Dimension(format!(
            "record has {} outputs, model {}, gain {:?}",
            record.outputs,
            sys.outputs(),
            k.shape()
        )));
    }
    let inputs = sys.f.ncols();
    let steps = record.steps();
    if !record.du.is_empty() && record.du.len() != steps * inputs {
        return Err(McError::Dimension(format!(
            "{} control values for {steps} steps of {inputs} inputs",
            record.du.len()
        )));
    }
    let dt = record.dt;
    let f = Dense::from(&sys.f);
    let mut filter = FilterKernel::new(sys, k, dt);

    let mut data = Vec::with_capacity((steps + 1) * dim);
    let mut pi = vec![0.0; dim];
    data.extend_from_slice(&pi);
    let mut innov = vec![0.0; record.outputs];
    for step in 0..steps {
        if !record.du.is_empty() {
            f.mul_add(&record.du[step * inputs..(step + 1) * inputs], dt, &mut pi);
        }
        filter.step(&mut pi, record.dy(step), &mut innov);
        data.extend_from_slice(&pi);
    }
    Ok(StatePath { dt, dim, data })
}

/// Estimation errors `x − π` sampled along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSamples {
    pub dim: usize,
    pub samples: Vec<Vec<f64>>,
}

/// Sample covariance with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCovariance {
    pub covariance: Mat,
    pub std_err: Mat,
    pub samples: usize,
}

const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

/// Pools samples across groups; standard errors come from resampling whole
/// groups (trajectories), which keeps within-trajectory correlation.
fn grouped_moment<F>(groups: &[Vec<(Vec<f64>, Vec<f64>)>], rows: usize, cols: usize, centre: bool, agg: F) -> Result<EmpiricalCovariance, McError>
where
    F: Fn(&Mat) -> Mat,
{
    if groups.len() < 2 {
        return Err(McError::InsufficientSamples(format!("{} trajectories", groups.len())));
    }
    // per-group sums of u, v and u vᵀ
    let stats: Vec<(Mat, Mat, Mat, usize)> = groups
        .iter()
        .map(|g| {
            let mut su = Mat::zeros(rows, 1);
            let mut sv = Mat::zeros(cols, 1);
            let mut suv = Mat::zeros(rows, cols);
            for (u, v) in g {
                for i in 0..rows {
                    su[(i, 0)] += u[i];
                    for j in 0..cols {
                        suv[(i, j)] += u[i] * v[j];
                    }
                }
                for j in 0..cols {
                    sv[(j, 0)] += v[j];
                }
            }
            (su, sv, suv, g.len())
        })
        .collect();
    let total: usize = stats.iter().map(|s| s.3).sum();
    if total < 2 {
        return Err(McError::InsufficientSamples(format!("{total} samples")));
    }

    let estimate = |weights: &[usize]| -> Mat {
        let mut su = Mat::zeros(rows, 1);
        let mut sv = Mat::zeros(cols, 1);
        let mut suv = Mat::zeros(rows, cols);
        let mut n = 0usize;
        for (s, &w) in stats.iter().zip(weights) {
            if w == 0 {
                continue;
            }
            let wf = w as f64;
            su += &s.0 * wf;
            sv += &s.1 * wf;
            suv += &s.2 * wf;
            n += w * s.3;
        }
        let nf = n as f64;
        let m = if centre {
            (suv - &su * sv.transpose() / nf) / (nf - 1.0)
        } else {
            suv / nf
        };
        agg(&m)
    };

    let ones = vec![1usize; stats.len()];
    let covariance = estimate(&ones);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut sum = Mat::zeros(covariance.nrows(), covariance.ncols());
    let mut sum_sq = Mat::zeros(covariance.nrows(), covariance.ncols());
    let mut weights = vec![0usize; stats.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        weights.iter_mut().for_each(|w| *w = 0);
        for _ in 0..stats.len() {
            let idx = rand::Rng::gen_range(&mut rng, 0..stats.len());
            weights[idx] += 1;
        }
        let e = estimate(&weights);
        sum += &e;
        sum_sq += e.component_mul(&e);
    }
    let b = BOOTSTRAP_RESAMPLES as f64;
    let mean = &sum / b;
    let var = (sum_sq / b - mean.component_mul(&mean)) * (b / (b - 1.0));
    let std_err = var.map(|v| v.max(0.0).sqrt());
    Ok(EmpiricalCovariance {
        covariance,
        std_err,
        samples: total,
    })
}

/// Symmetrised sample covariance of the pooled error samples.
pub fn error_covariance_from_samples(traces: &[ErrorSamples]) -> Result<EmpiricalCovariance, McError> {
    let dim = traces.first().map(|t| t.dim).unwrap_or(0);
    let groups: Vec<Vec<(Vec<f64>, Vec<f64>)>> = traces
        .iter()
        .map(|t| t.samples.iter().map(|s| (s.clone(), s.clone())).collect())
        .collect();
    grouped_moment(&groups, dim, dim, true, |m| (m + m.transpose()) * 0.5)
}

/// Covariance of `x − π` over all samples at times `≥ burn_in`, with
/// bootstrap standard errors over trajectories.
pub fn empirical_error_covariance(
    states: &[StatePath],
    estimates: &[StatePath],
    burn_in: f64,
) -> Result<EmpiricalCovariance, McError> {
    if states.len() != estimates.len() {
        return Err(McError::Dimension(format!(
            "{} state paths, {} estimate paths",
            states.len(),
            estimates.len()
        )));
    }
    let traces = states
        .iter()
        .zip(estimates)
        .map(|(s, e)| error_samples(s, e, burn_in, 1))
        .collect::<Result<Vec<_>, _>>()?;
    error_covariance_from_samples(&traces)
}

/// `x − π` at every `stride`-th step from `burn_in` on.
pub fn error_samples(
    state: &StatePath,
    estimate: &StatePath,
    burn_in: f64,
    stride: usize,
) -> Result<ErrorSamples, McError> {
    if state.len() != estimate.len() || state.dim != estimate.dim {
        return Err(McError::Dimension("state and estimate paths differ in shape".into()));
    }
    let start = (burn_in / state.dt).ceil() as usize;
    if start >= state.len() {
        return Err(McError::InsufficientSamples(format!(
            "burn-in {burn_in} covers the whole horizon"
        )));
    }
    let samples = (start..state.len())
        .step_by(stride.max(1))
        .map(|k| {
            state
                .at(k)
                .iter()
                .zip(estimate.at(k))
                .map(|(x, p)| x - p)
                .collect()
        })
        .collect();
    Ok(ErrorSamples {
        dim: state.dim,
        samples,
    })
}

/// Settings of a full Monte Carlo comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub trajectories: usize,
    pub dt: f64,
    pub burn_in: f64,
    /// Sampling window after burn-in.
    pub window: f64,
    /// Time between retained samples.
    pub sample_every: f64,
    pub seed: u64,
}

impl McConfig {
    /// Burn-in of five error-relaxation times (`1/|max Re eig(A − K C)|`)
    /// followed by a window of two.
    pub fn for_filter(sys: &SystemModel, filter: &StationaryFilter, trajectories: usize, dt: f64, seed: u64) -> Self {
        let closed = sys.drift() - filter.gain.matrix() * &sys.c;
        let tau = 1.0 / spectral_abscissa(&closed).abs();
        Self {
            trajectories,
            dt,
            burn_in: 5.0 * tau,
            window: 2.0 * tau,
            sample_every: 1.0,
            seed,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.burn_in + self.window
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryCheck {
    pub row: usize,
    pub col: usize,
    pub empirical: f64,
    pub expected: f64,
    pub std_err: f64,
    /// `|empirical − expected| / std_err`.
    pub deviation: f64,
    pub limit: f64,
}

impl EntryCheck {
    pub fn passed(&self) -> bool {
        self.deviation <= self.limit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub error_covariance: EmpiricalCovariance,
    pub innovation_covariance: EmpiricalCovariance,
    pub innovation_lag1: EmpiricalCovariance,
    /// `x − π` covariance against `V∞`, limit 5 SE.
    pub covariance_checks: Vec<EntryCheck>,
    /// Innovation covariance against `D Re(Θ) Dᵀ + C V∞ Cᵀ dt` (per unit
    /// time), limit 5 SE.
    pub innovation_checks: Vec<EntryCheck>,
    /// Lag-one innovation cross covariance against zero, limit 3 SE.
    pub whiteness_checks: Vec<EntryCheck>,
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.covariance_checks
            .iter()
            .chain(&self.innovation_checks)
            .chain(&self.whiteness_checks)
            .all(EntryCheck::passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.covariance_checks
            .iter()
            .map(|c| c.deviation)
            .fold(0.0, f64::max)
    }
}

fn entry_checks(emp: &EmpiricalCovariance, expected: &Mat, limit: f64, upper_only: bool) -> Vec<EntryCheck> {
    let mut out = Vec::new();
    for i in 0..expected.nrows() {
        for j in 0..expected.ncols() {
            if upper_only && j < i {
                continue;
            }
            let se = emp.std_err[(i, j)];
            let diff = (emp.covariance[(i, j)] - expected[(i, j)]).abs();
            let deviation = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            out.push(EntryCheck {
                row: i,
                col: j,
                empirical: emp.covariance[(i, j)],
                expected: expected[(i, j)],
                std_err: se,
                deviation,
                limit,
            });
        }
    }
    out
}

struct TrajectoryStats {
    errors: Vec<(Vec<f64>, Vec<f64>)>,
    innov: Vec<(Vec<f64>, Vec<f64>)>,
    lag: Vec<(Vec<f64>, Vec<f64>)>,
}

/// One fused simulation and filter step.
trait Stepper {
    /// Advances `x` and `pi` and writes the innovation `dy − Cπ dt`.
    fn step(&mut self, rng: &mut ChaCha8Rng, x: &mut [f64], pi: &mut [f64], innov: &mut [f64]);
}

struct DynStepper {
    kernel: Kernel,
    filter: FilterKernel,
    dy: Vec<f64>,
}

impl Stepper for DynStepper {
    #[inline]
    fn step(&mut self, rng: &mut ChaCha8Rng, x: &mut [f64], pi: &mut [f64], innov: &mut [f64]) {
        self.kernel.step(rng, x, &mut self.dy);
        self.filter.step(pi, &self.dy, innov);
    }
}

/// Same arithmetic as [`DynStepper`], in the same order, with sizes known at
/// compile time. `N` counts the standard normals drawn per step.
struct FixedStepper<const D: usize, const L: usize, const N: usize> {
    xx: [[f64; D]; D],
    xz: [[f64; D]; N],
    yx: [[f64; L]; D],
    yz: [[f64; L]; N],
    phi: [[f64; D]; D],
    c: [[f64; L]; D],
    k: [[f64; D]; L],
    neg_dt: f64,
}

impl<const D: usize, const L: usize, const N: usize> FixedStepper<D, L, N> {
    fn new(kernel: &Kernel, filter: &FilterKernel) -> Option<Self> {
        if kernel.dim != D || kernel.outputs != L || kernel.noise != N {
            return None;
        }
        let rows = D + L;
        let m = |i: usize, j: usize| kernel.m.data[j * rows + i];
        Some(Self {
            xx: std::array::from_fn(|j| std::array::from_fn(|i| m(i, j))),
            xz: std::array::from_fn(|j| std::array::from_fn(|i| m(i, D + j))),
            yx: std::array::from_fn(|j| std::array::from_fn(|i| m(D + i, j))),
            yz: std::array::from_fn(|j| std::array::from_fn(|i| m(D + i, D + j))),
            phi: std::array::from_fn(|j| std::array::from_fn(|i| filter.phi.data[j * D + i])),
            c: std::array::from_fn(|j| std::array::from_fn(|i| filter.c.data[j * L + i])),
            k: std::array::from_fn(|j| std::array::from_fn(|i| filter.k.data[j * D + i])),
            neg_dt: -filter.dt,
        })
    }
}

impl<const D: usize, const L: usize, const N: usize> Stepper for FixedStepper<D, L, N> {
    #[inline]
    fn step(&mut self, rng: &mut ChaCha8Rng, x: &mut [f64], pi: &mut [f64], innov: &mut [f64]) {
        let x_in: [f64; D] = std::array::from_fn(|i| x[i]);
        let z: [f64; N] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let mut xn = [0.0; D];
        let mut dy = [0.0; L];
        for j in 0..D {
            for i in 0..D {
                xn[i] += self.xx[j][i] * x_in[j];
            }
            for i in 0..L {
                dy[i] += self.yx[j][i] * x_in[j];
            }
        }
        for j in 0..N {
            for i in 0..D {
                xn[i] += self.xz[j][i] * z[j];
            }
            for i in 0..L {
                dy[i] += self.yz[j][i] * z[j];
            }
        }
        x[..D].copy_from_slice(&xn);

        let p: [f64; D] = std::array::from_fn(|i| pi[i]);
        let mut nu = dy;
        let mut pn = [0.0; D];
        for j in 0..D {
            let s = self.neg_dt * p[j];
            for i in 0..L {
                nu[i] += self.c[j][i] * s;
            }
            for i in 0..D {
                pn[i] += self.phi[j][i] * p[j];
            }
        }
        for j in 0..L {
            for i in 0..D {
                pn[i] += self.k[j][i] * dy[j];
            }
        }
        pi[..D].copy_from_slice(&pn);
        innov[..L].copy_from_slice(&nu);
    }
}

fn sampling(cfg: &McConfig) -> (usize, usize, usize) {
    let steps = (cfg.horizon() / cfg.dt).round() as usize;
    let stride = ((cfg.sample_every / cfg.dt).round() as usize).max(1);
    let start = (cfg.burn_in / cfg.dt).ceil() as usize;
    (steps, start, stride)
}

/// Simulation and filtering fused into one pass; nothing but the samples is
/// stored. Draws random numbers in the same order as [`simulate_trajectory`].
fn trajectory_stats(
    sys: &SystemModel,
    gain: &FilterGain,
    cfg: &McConfig,
    index: u64,
) -> Result<TrajectoryStats, McError> {
    let kernel = Kernel::new(sys, cfg.dt)?;
    let filter = FilterKernel::new(sys, gain.matrix(), cfg.dt);
    let mut rng = Kernel::rng(cfg.seed, index);
    let x = kernel.initial_state(&mut rng);
    let ell = kernel.outputs;
    if let Some(fixed) = FixedStepper::<4, 2, 8>::new(&kernel, &filter) {
        return Ok(drive(fixed, rng, x, ell, cfg));
    }
    let dy = vec![0.0; ell];
    Ok(drive(DynStepper { kernel, filter, dy }, rng, x, ell, cfg))
}

fn drive<S: Stepper>(mut stepper: S, mut rng: ChaCha8Rng, mut x: Vec<f64>, ell: usize, cfg: &McConfig) -> TrajectoryStats {
    let (steps, start, stride) = sampling(cfg);
    // innovations scaled so their covariance is per unit time
    let inv_sqrt_dt = 1.0 / cfg.dt.sqrt();
    let mut pi = vec![0.0; x.len()];
    let mut innov = vec![0.0; ell];
    let mut stats = TrajectoryStats {
        errors: Vec::new(),
        innov: Vec::new(),
        lag: Vec::new(),
    };
    let mut pending: Option<Vec<f64>> = None;
    let mut next_sample = start;
    for k in 0..steps {
        let error = if k == next_sample && k + 1 < steps {
            next_sample += stride;
            Some(x.iter().zip(&pi).map(|(x, p)| x - p).collect::<Vec<f64>>())
        } else {
            None
        };
        stepper.step(&mut rng, &mut x, &mut pi, &mut innov);
        if pending.is_none() && error.is_none() {
            continue;
        }
        let nu: Vec<f64> = innov.iter().map(|v| v * inv_sqrt_dt).collect();
        if let Some(prev) = pending.take() {
            stats.lag.push((nu.clone(), prev));
        }
        if let Some(e) = error {
            stats.errors.push((e.clone(), e));
            stats.innov.push((nu.clone(), nu.clone()));
            pending = Some(nu);
        }
    }
    stats
}

/// Simulates `cfg.trajectories` trajectories, filters each with the
/// stationary gain and compares the sampled statistics with the stationary
/// solution.
pub fn monte_carlo_check(sys: &SystemModel, filter: &StationaryFilter, cfg: &McConfig) -> Result<McReport, McError> {
    check_simulable(sys, cfg.dt)?;
    let run = |i: u64| trajectory_stats(sys, &filter.gain, cfg, i);
    #[cfg(feature = "parallel")]
    let stats: Vec<TrajectoryStats> = {
        use rayon::prelude::*;
        (0..cfg.trajectories as u64)
            .into_par_iter()
            .map(run)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let stats: Vec<TrajectoryStats> = (0..cfg.trajectories as u64).map(run).collect::<Result<_, _>>()?;

    let dim = sys.state_dim();
    let ell = sys.outputs();
    let mut err_groups = Vec::with_capacity(stats.len());
    let mut innov_groups = Vec::with_capacity(stats.len());
    let mut lag_groups = Vec::with_capacity(stats.len());
    for s in stats {
        err_groups.push(s.errors);
        innov_groups.push(s.innov);
        lag_groups.push(s.lag);
    }
    let error_covariance = grouped_moment(&err_groups, dim, dim, true, |m| (m + m.transpose()) * 0.5)?;
    let innovation_covariance = grouped_moment(&innov_groups, ell, ell, false, |m| (m + m.transpose()) * 0.5)?;
    let innovation_lag1 = grouped_moment(&lag_groups, ell, ell, false, |m| m.clone())?;

    let v = filter.covariance.matrix();
    let expected_innov = sys.innovation_covariance() + &sys.c * v * sys.c.transpose() * cfg.dt;
    Ok(McReport {
        covariance_checks: entry_checks(&error_covariance, v, 5.0, true),
        innovation_checks: entry_checks(&innovation_covariance, &expected_innov, 5.0, true),
        whiteness_checks: entry_checks(&innovation_lag1, &Mat::zeros(ell, ell), 3.0, false),
        error_covariance,
        innovation_covariance,
        innovation_lag1,
    })
}

/// Error covariance at step `dt` against step `dt/2` on the same Brownian
/// paths.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAudit {
    pub coarse: EmpiricalCovariance,
    pub fine: EmpiricalCovariance,
    /// Coarse against fine, in units of the fine standard error; limit 1.
    pub checks: Vec<EntryCheck>,
}

impl StepAudit {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(EntryCheck::passed)
    }
}

fn audit_trajectory(
    sys: &SystemModel,
    gain: &FilterGain,
    cfg: &McConfig,
    index: u64,
) -> Result<(Vec<(Vec<f64>, Vec<f64>)>, Vec<(Vec<f64>, Vec<f64>)>), McError> {
    let mut coarse = Kernel::new(sys, cfg.dt)?;
    let mut fine = Kernel::new(sys, cfg.dt / 2.0)?;
    let mut coarse_filter = FilterKernel::new(sys, gain.matrix(), cfg.dt);
    let mut fine_filter = FilterKernel::new(sys, gain.matrix(), cfg.dt / 2.0);
    let (dim, ell, n) = (coarse.dim, coarse.outputs, coarse.noise);
    let (steps, start, stride) = sampling(cfg);

    let mut rng = Kernel::rng(cfg.seed, index);
    let mut xc = coarse.initial_state(&mut rng);
    let mut xf = xc.clone();
    let (mut pc, mut pf) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut dy, mut innov) = (vec![0.0; ell], vec![0.0; ell]);
    let (mut z1, mut z2, mut z) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut out_c, mut out_f) = (Vec::new(), Vec::new());
    let mut next_sample = start;
    for k in 0..steps {
        if k == next_sample {
            next_sample += stride;
            let ec: Vec<f64> = xc.iter().zip(&pc).map(|(x, p)| x - p).collect();
            let ef: Vec<f64> = xf.iter().zip(&pf).map(|(x, p)| x - p).collect();
            out_c.push((ec.clone(), ec));
            out_f.push((ef.clone(), ef));
        }
        for (a, b) in z1.iter_mut().zip(z2.iter_mut()) {
            *a = StandardNormal.sample(&mut rng);
            *b = StandardNormal.sample(&mut rng);
        }
        for ((v, a), b) in z.iter_mut().zip(&z1).zip(&z2) {
            *v = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
        }
        fine.step_with(&z1, &mut xf, &mut dy);
        fine_filter.step(&mut pf, &dy, &mut innov);
        fine.step_with(&z2, &mut xf, &mut dy);
        fine_filter.step(&mut pf, &dy, &mut innov);
        coarse.step_with(&z, &mut xc, &mut dy);
        coarse_filter.step(&mut pc, &dy, &mut innov);
    }
    Ok((out_c, out_f))
}

/// Runs the check configuration at `cfg.dt` and `cfg.dt / 2` with coupled
/// noise and compares the two error covariances.
pub fn step_size_audit(sys: &SystemModel, filter: &StationaryFilter, cfg: &McConfig) -> Result<StepAudit, McError> {
    Kernel::new(sys, cfg.dt / 2.0)?;
    let run = |i: u64| audit_trajectory(sys, &filter.gain, cfg, i);
    #[cfg(feature = "parallel")]
    let pairs: Vec<_> = {
        use rayon::prelude::*;
        (0..cfg.trajectories as u64)
            .into_par_iter()
            .map(run)
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<_> = (0..cfg.trajectories as u64).map(run).collect::<Result<_, _>>()?;
    let dim = sys.state_dim();
    let (coarse_groups, fine_groups): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let sym = |m: &Mat| (m + m.transpose()) * 0.5;
    let coarse = grouped_moment(&coarse_groups, dim, dim, true, sym)?;
    let fine = grouped_moment(&fine_groups, dim, dim, true, sym)?;
    let mut checks = entry_checks(&coarse, &fine.covariance, 1.0, true);
    for c in checks.iter_mut() {
        c.std_err = fine.std_err[(c.row, c.col)];
        c.deviation = (c.empirical - c.expected).abs() / c.std_err;
    }
    Ok(StepAudit { coarse, fine, checks })
}

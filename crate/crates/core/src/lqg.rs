//! LQG control on top of the filter: control Riccati equation, optimal
//! feedback, minimum average cost, and the cheap-control bound `Tr(Q V∞)`.

use thiserror::Error;

use crate::filter::{CovarianceMatrix, FilterError, FilterGain, StationaryFilter};
use crate::gaussian::{symmetrize, Mat, SystemModel};
use crate::riccati::{RiccatiProblem, RiccatiSolution, SolverError, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqgError {
    #[error("state weight Q is not positive semidefinite (min eigenvalue {0:e})")]
    QNotPsd(f64),
    #[error("input weight R is not positive definite (min eigenvalue {0:e})")]
    RNotPd(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Weights of `⟨xᵀ Q x + uᵀ R u⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q: Mat,
    r: Mat,
}

impl CostWeights {
    pub fn new(q: Mat, r: Mat) -> Result<Self, LqgError> {
        if !q.is_square() || !r.is_square() {
            return Err(LqgError::Dimension(format!("Q {:?}, R {:?}", q.shape(), r.shape())));
        }
        let q = symmetrize(&q);
        let r = symmetrize(&r);
        let qmin = q.symmetric_eigenvalues().min();
        if qmin < -1e-12 {
            return Err(LqgError::QNotPsd(qmin));
        }
        let rmin = r.symmetric_eigenvalues().min();
        if !(rmin > 0.0) {
            return Err(LqgError::RNotPd(rmin));
        }
        Ok(Self { q, r })
    }

    /// `R = ρ I_k`.
    pub fn scaled_identity(q: Mat, rho: f64, k: usize) -> Result<Self, LqgError> {
        Self::new(q, Mat::identity(k, k) * rho)
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub p_inf: Mat,
    /// `u = gain · π(x)`.
    pub gain: Mat,
    pub j_min: f64,
    pub j_cheap: f64,
    /// Algebraic residual of the control equation at `p_inf`.
    pub residual: f64,
}

fn check_weights(sys: &SystemModel, w: &CostWeights) -> Result<(), LqgError> {
    let dim = sys.state_dim();
    if w.q.nrows() != dim || w.r.nrows() != sys.f.ncols() {
        return Err(LqgError::Dimension(format!(
            "Q {:?} for state {dim}, R {:?} for {} inputs",
            w.q.shape(),
            w.r.shape(),
            sys.f.ncols()
        )));
    }
    Ok(())
}

/// The control equation `PA + AᵀP − PFR⁻¹FᵀP + Q = 0` as the dual generic
/// problem (reversed time).
pub fn control_problem(a: &Mat, f: &Mat, w: &CostWeights) -> Result<RiccatiProblem, LqgError> {
    Ok(RiccatiProblem::new(
        a.transpose(),
        w.q.clone(),
        f.transpose(),
        Mat::zeros(a.nrows(), f.ncols()),
        w.r.clone(),
    )?)
}

/// Max-norm of `PA + AᵀP − PFR⁻¹FᵀP + Q`.
pub fn control_residual(p: &Mat, sys: &SystemModel, w: &CostWeights) -> Result<f64, LqgError> {
    check_weights(sys, w)?;
    Ok(control_problem(&sys.drift(), &sys.f, w)?.residual(p))
}

/// Stationary `P∞`, integrated backward from `P = 0`.
pub fn control_riccati_stationary(
    sys: &SystemModel,
    w: &CostWeights,
    opts: &SolverOptions,
) -> Result<RiccatiSolution, LqgError> {
    check_weights(sys, w)?;
    Ok(control_problem(&sys.drift(), &sys.f, w)?.solve(opts)?)
}

/// `−R⁻¹ Fᵀ P`.
pub fn optimal_gain(p_inf: &Mat, sys: &SystemModel, w: &CostWeights) -> Result<Mat, LqgError> {
    check_weights(sys, w)?;
    let r_inv = w
        .r
        .clone()
        .try_inverse()
        .ok_or(LqgError::RNotPd(0.0))?;
    Ok(-(r_inv * sys.f.transpose() * p_inf))
}

/// `Tr(K D Re(Θ) Dᵀ Kᵀ P) + Tr(Q V)`.
pub fn lqg_min_cost(
    sys: &SystemModel,
    w: &CostWeights,
    v_inf: &CovarianceMatrix,
    k_inf: &FilterGain,
    p_inf: &Mat,
) -> Result<f64, LqgError> {
    check_weights(sys, w)?;
    let k = k_inf.matrix();
    let control_term = (k * sys.innovation_covariance() * k.transpose() * p_inf).trace();
    Ok(control_term + cheap_bound(v_inf, &w.q))
}

/// `Tr(Q V)`.
pub fn cheap_bound(v_inf: &CovarianceMatrix, q: &Mat) -> f64 {
    (q * v_inf.matrix()).trace()
}

/// `Q = diag{1, 1, 0, ..., 0}`: the first mode's quadratures.
pub fn oscillator_weight(dim: usize) -> Mat {
    let mut q = Mat::zeros(dim, dim);
    q[(0, 0)] = 1.0;
    q[(1, 1)] = 1.0;
    q
}

/// Stationary excitation number of the first mode under ideal cheap control,
/// `(V[0][0] + V[1][1] − 1) / 2`.
pub fn e_min(v_inf: &CovarianceMatrix) -> f64 {
    let v = v_inf.matrix();
    (v[(0, 0)] + v[(1, 1)] - 1.0) / 2.0
}

/// Control equation, gain and both cost figures for an already solved filter.
pub fn solve_lqg(
    sys: &SystemModel,
    w: &CostWeights,
    filter: &StationaryFilter,
    opts: &SolverOptions,
) -> Result<ControlSolution, LqgError> {
    let control_opts = SolverOptions {
        initial: None,
        ..opts.clone()
    };
    let p = control_riccati_stationary(sys, w, &control_opts)?;
    let gain = optimal_gain(&p.x, sys, w)?;
    let j_min = lqg_min_cost(sys, w, &filter.covariance, &filter.gain, &p.x)?;
    Ok(ControlSolution {
        residual: p.diagnostics.residual,
        j_cheap: cheap_bound(&filter.covariance, &w.q),
        p_inf: p.x,
        gain,
        j_min,
    })
}

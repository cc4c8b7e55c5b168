//! Quantum Kalman filter: gain, covariance Riccati flow, stationary error
//! covariance, and the unconditional (unmeasured) covariance.

use thiserror::Error;

use crate::gaussian::{hermitian_min_eigenvalue, sigma_matrix, symmetrize, Mat, SystemModel};
use crate::linalg::{lyapunov, LinalgError};
use crate::riccati::{RiccatiProblem, RiccatiSolution, SolverError, SolverOptions};

/// Symmetry tolerance of a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalue floor for the uncertainty relation `V + (i/2)Σ ⪰ 0`.
pub const UNCERTAINTY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("degenerate measurement: D Re(Θ) Dᵀ has condition number {condition:e}")]
    DegenerateMeasurement { condition: f64 },
    #[error("covariance is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("unconditional moments are unstable: {0}")]
    Unstable(#[from] LinalgError),
}

/// Real symmetric `2n × 2n` (symmetrised) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(Mat);

impl CovarianceMatrix {
    pub fn new(v: Mat) -> Result<Self, FilterError> {
        if !v.is_square() || v.nrows() % 2 != 0 {
            return Err(FilterError::Dimension(format!("covariance shape {:?}", v.shape())));
        }
        let dev = (&v - v.transpose()).amax();
        if !(dev <= SYMMETRY_TOL * v.amax().max(1.0)) {
            return Err(FilterError::NotSymmetric(dev));
        }
        Ok(Self(symmetrize(&v)))
    }

    pub fn vacuum(n: usize) -> Self {
        Self(Mat::identity(2 * n, 2 * n) * 0.5)
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Smallest eigenvalue of `V + (i/2)Σ_n`; a physical Gaussian state has
    /// this at least `−UNCERTAINTY_TOL`.
    pub fn uncertainty_margin(&self) -> f64 {
        let sigma = sigma_matrix(self.dim() / 2) * 0.5;
        hermitian_min_eigenvalue(&self.0, &sigma)
    }

    pub fn satisfies_uncertainty(&self) -> bool {
        self.uncertainty_margin() >= -UNCERTAINTY_TOL
    }
}

/// Kalman gain `K`, `2n × ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterGain(Mat);

impl FilterGain {
    pub fn from_matrix(k: Mat) -> Self {
        Self(k)
    }

    /// Gain that ignores the measurement record.
    pub fn zeros_for(sys: &SystemModel) -> Self {
        Self(Mat::zeros(sys.state_dim(), sys.outputs()))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }
}

/// The filter Riccati equation of `sys` as a generic problem.
pub fn filter_problem(sys: &SystemModel) -> Result<RiccatiProblem, FilterError> {
    RiccatiProblem::new(
        sys.drift(),
        sys.diffusion(),
        sys.c.clone(),
        sys.cross_correlation(),
        sys.innovation_covariance(),
    )
    .map_err(|e| match e {
        SolverError::IllConditioned { condition } => FilterError::DegenerateMeasurement { condition },
        other => FilterError::Solver(other),
    })
}

fn check_dim(v: &CovarianceMatrix, sys: &SystemModel) -> Result<(), FilterError> {
    if v.dim() != sys.state_dim() {
        return Err(FilterError::Dimension(format!(
            "covariance is {}×{}, model state is {}",
            v.dim(),
            v.dim(),
            sys.state_dim()
        )));
    }
    Ok(())
}

/// `K = (V Cᵀ + B Re(Θ) Dᵀ)(D Re(Θ) Dᵀ)⁻¹`.
pub fn kalman_gain(v: &CovarianceMatrix, sys: &SystemModel) -> Result<FilterGain, FilterError> {
    check_dim(v, sys)?;
    Ok(FilterGain(filter_problem(sys)?.gain(v.matrix())))
}

/// `A V + V Aᵀ + B Re(Θ) Bᵀ + E_bath − K D Re(Θ) Dᵀ Kᵀ` with `A` including the
/// bath drift.
pub fn riccati_rhs(v: &CovarianceMatrix, sys: &SystemModel) -> Result<Mat, FilterError> {
    check_dim(v, sys)?;
    Ok(filter_problem(sys)?.rhs(v.matrix()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryFilter {
    pub covariance: CovarianceMatrix,
    pub gain: FilterGain,
    pub solution: RiccatiSolution,
}

impl StationaryFilter {
    pub fn residual(&self) -> f64 {
        self.solution.diagnostics.residual
    }
}

/// Integrates the covariance equation to steady state. The default initial
/// condition is the vacuum `½I`.
pub fn stationary_covariance(
    sys: &SystemModel,
    opts: &SolverOptions,
) -> Result<StationaryFilter, FilterError> {
    let problem = filter_problem(sys)?;
    let opts = if opts.initial.is_none() {
        opts.clone().with_initial(CovarianceMatrix::vacuum(sys.modes()).into_matrix())
    } else {
        opts.clone()
    };
    let solution = problem.solve(&opts)?;
    let gain = FilterGain(problem.gain(&solution.x));
    Ok(StationaryFilter {
        covariance: CovarianceMatrix(solution.x.clone()),
        gain,
        solution,
    })
}

/// Solves `A V + V Aᵀ + B Re(Θ) Bᵀ + E_bath = 0`.
pub fn unconditional_covariance(sys: &SystemModel) -> Result<CovarianceMatrix, FilterError> {
    Ok(CovarianceMatrix(lyapunov(&sys.drift(), &sys.diffusion())?))
}

//! Mechanical oscillator coupled to a driven cavity by linearised radiation
//! pressure. State ordering is `[q1, p1, q2, p2]` (oscillator, cavity).

use nalgebra::DVector;
use num_complex::Complex64;

use crate::gaussian::{Mat, ModelError, SystemModel};
use crate::lqg::oscillator_weight;
use crate::network::{assemble_network, CouplingMatrix, NetworkConfig};

/// Parameters in units of the oscillator frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    pub omega: f64,
    /// Cavity detuning `Δ`.
    pub delta_detuning: f64,
    /// Radiation-pressure coupling `λ`.
    pub lambda: f64,
    /// Cavity linewidth `κ`.
    pub kappa: f64,
    /// Bath coupling `γ`.
    pub gamma: f64,
    /// Bath mean excitation `n̄`.
    pub nbar: f64,
}

impl Default for OscillatorParams {
    /// Bad-cavity, red-detuned operating point: `λ = 0.3`, `κ = 4`, `Δ = 1`,
    /// `γ = 1e-7`, `n̄ = 1e5`.
    fn default() -> Self {
        Self {
            omega: 1.0,
            delta_detuning: 1.0,
            lambda: 0.3,
            kappa: 4.0,
            gamma: 1e-7,
            nbar: 1e5,
        }
    }
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("kappa", self.kappa), ("gamma", self.gamma), ("nbar", self.nbar)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ModelError::OutOfRange { name, value });
            }
        }
        Ok(())
    }
}

/// Hamiltonian matrix of `ω(q1² + p1²)/2 + Δ(q2² + p2²)/2 − λ q1 q2`.
pub fn build_g(params: &OscillatorParams) -> Mat {
    let (w, d, l) = (params.omega, params.delta_detuning, params.lambda);
    Mat::from_row_slice(
        4,
        4,
        &[
            w, 0.0, -l, 0.0, //
            0.0, w, 0.0, 0.0, //
            -l, 0.0, d, 0.0, //
            0.0, 0.0, 0.0, d,
        ],
    )
}

/// Cavity output coupling `L = √κ a₂`, i.e. `c = √(κ/2) [0, 0, 1, i]`.
pub fn build_coupling(params: &OscillatorParams) -> CouplingMatrix {
    let s = (params.kappa / 2.0).sqrt();
    CouplingMatrix::from_vector(DVector::from_vec(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(0.0, s),
    ]))
}

/// Oscillator damping `−(γ/2) Q` and diffusion `γ(2n̄ + 1) Q` with
/// `Q = diag{1, 1, 0, 0}`.
pub fn apply_thermal_bath(sys: &SystemModel, params: &OscillatorParams) -> SystemModel {
    let q = oscillator_weight(sys.state_dim());
    let mut out = sys.clone();
    out.extra_drift = &q * (-params.gamma / 2.0);
    out.extra_diffusion = &q * (params.gamma * (2.0 * params.nbar + 1.0));
    out
}

/// Direct drive of both oscillator quadratures.
pub fn default_actuation() -> Mat {
    Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
}

/// Network model plus thermal bath for one configuration.
pub fn build_model(
    params: &OscillatorParams,
    cfg: &NetworkConfig,
    f: &Mat,
) -> Result<SystemModel, ModelError> {
    params.validate()?;
    let sys = assemble_network(cfg, &build_coupling(params), &build_g(params), f)?;
    Ok(apply_thermal_bath(&sys, params))
}

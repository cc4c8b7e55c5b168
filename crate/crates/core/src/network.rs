//! Three-channel optical network: an entangling beam splitter (BS1) mixing a
//! squeezed field with a coherent field, a loss stage on the system output,
//! a recombining beam splitter (BS2) and two homodyne detectors.
//!
//! Channel order is `[W1 (squeezed), W2 (coherent), W3 (loss vacuum)]`. After
//! BS1 the first arm couples to the system and the second bypasses it.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::gaussian::{
    sigma_matrix, squeezed_theta, vacuum_block, Mat, ModelError, NoiseCorrelation, SystemModel,
};

/// Knobs of the network. Reflectivities are stored squared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub beta1_sq: f64,
    pub beta2_sq: f64,
    pub delta_sq: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Squeezing parameter of the `W1` input.
    pub r: f64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_unit("beta1_sq", self.beta1_sq)?;
        check_unit("beta2_sq", self.beta2_sq)?;
        check_unit("delta_sq", self.delta_sq)?;
        Ok(())
    }

    /// Transmission amplitude `α₁ = √(1 − β₁²)` of BS1.
    pub fn alpha1(&self) -> f64 {
        (1.0 - self.beta1_sq).sqrt()
    }

    pub fn with_phases(self, theta1: f64, theta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            ..self
        }
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ModelError::OutOfRange { name, value })
    }
}

/// System–field coupling `L = cᵀx` together with its real form
/// `C̄_s = √2 [Re(c)ᵀ; Im(c)ᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    c: DVector<Complex64>,
    cbar: Mat,
}

impl CouplingMatrix {
    pub fn from_vector(c: DVector<Complex64>) -> Self {
        let dim = c.len();
        let mut cbar = Mat::zeros(2, dim);
        for (j, cj) in c.iter().enumerate() {
            cbar[(0, j)] = std::f64::consts::SQRT_2 * cj.re;
            cbar[(1, j)] = std::f64::consts::SQRT_2 * cj.im;
        }
        Self { c, cbar }
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.c
    }

    pub fn cbar(&self) -> &Mat {
        &self.cbar
    }

    pub fn state_dim(&self) -> usize {
        self.c.len()
    }
}

fn rotation_blocks(cos: f64, sin: f64, first: usize, second: usize) -> Mat {
    let mut t = Mat::identity(6, 6);
    for k in 0..2 {
        let (i, j) = (2 * first + k, 2 * second + k);
        t[(i, i)] = cos;
        t[(j, j)] = cos;
        t[(i, j)] = sin;
        t[(j, i)] = -sin;
    }
    t
}

/// Scattering matrix of a beam splitter between channels 1 and 2 with
/// reflectivity `β²`; channel 3 passes through.
pub fn beam_splitter(beta_sq: f64) -> Result<Mat, ModelError> {
    check_unit("beta_sq", beta_sq)?;
    Ok(rotation_blocks((1.0 - beta_sq).sqrt(), beta_sq.sqrt(), 0, 1))
}

/// Optical loss on channel 1, modelled as a beam splitter with reflectivity
/// `δ²` that admits the vacuum channel 3.
pub fn loss_stage(delta_sq: f64) -> Result<Mat, ModelError> {
    check_unit("delta_sq", delta_sq)?;
    Ok(rotation_blocks((1.0 - delta_sq).sqrt(), delta_sq.sqrt(), 0, 2))
}

/// `[D₁, D₂, O₂]`: detector 1 reads quadrature `θ₁` of channel 1, detector 2
/// reads quadrature `θ₂` of channel 2.
pub fn homodyne_selectors(theta1: f64, theta2: f64) -> Mat {
    let mut d = Mat::zeros(2, 6);
    d[(0, 0)] = theta1.cos();
    d[(0, 1)] = theta1.sin();
    d[(1, 2)] = theta2.cos();
    d[(1, 3)] = theta2.sin();
    d
}

/// `D = [D₁, D₂, O₂] T₂ T_L T₁`.
pub fn detection_matrix(cfg: &NetworkConfig) -> Result<Mat, ModelError> {
    cfg.validate()?;
    let t1 = beam_splitter(cfg.beta1_sq)?;
    let tl = loss_stage(cfg.delta_sq)?;
    let t2 = beam_splitter(cfg.beta2_sq)?;
    Ok(homodyne_selectors(cfg.theta1, cfg.theta2) * t2 * tl * t1)
}

/// `B = [α₁ Σ_n C̄_sᵀ σ, β₁ Σ_n C̄_sᵀ σ, 0]`.
pub fn input_matrix(cfg: &NetworkConfig, coupling: &CouplingMatrix) -> Result<Mat, ModelError> {
    cfg.validate()?;
    let dim = coupling.state_dim();
    if dim == 0 || dim % 2 != 0 {
        return Err(ModelError::Dimension(format!("coupling vector length {dim} is not 2n")));
    }
    let arm = sigma_matrix(dim / 2) * coupling.cbar().transpose() * sigma_matrix(1);
    let mut b = Mat::zeros(dim, 6);
    b.view_mut((0, 0), (dim, 2)).copy_from(&(&arm * cfg.alpha1()));
    b.view_mut((0, 2), (dim, 2)).copy_from(&(&arm * cfg.beta1_sq.sqrt()));
    Ok(b)
}

/// `Θ = diag{Θ₁(r), ½I₂, ½I₂}` (as Hermitian blocks).
pub fn network_noise(r: f64) -> NoiseCorrelation {
    NoiseCorrelation::from_blocks(vec![squeezed_theta(r), vacuum_block(), vacuum_block()])
}

/// Builds the full model for one network configuration. `g` is the system
/// Hamiltonian matrix and `f` the actuation matrix, passed through unchanged.
pub fn assemble_network(
    cfg: &NetworkConfig,
    coupling: &CouplingMatrix,
    g: &Mat,
    f: &Mat,
) -> Result<SystemModel, ModelError> {
    if g.nrows() != coupling.state_dim() {
        return Err(ModelError::Dimension(format!(
            "G is {}×{} but the coupling vector has length {}",
            g.nrows(),
            g.ncols(),
            coupling.state_dim()
        )));
    }
    let b = input_matrix(cfg, coupling)?;
    let d = detection_matrix(cfg)?;
    SystemModel::new(g.clone(), b, d, f.clone(), network_noise(cfg.r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::validate_system;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn blocks_of(m: &Mat) -> [[f64; 3]; 3] {
        // scalar multiple of I₂ in each 2×2 block (checked separately)
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(2 * i, 2 * j)];
                assert_eq!(m[(2 * i, 2 * j)], m[(2 * i + 1, 2 * j + 1)]);
                assert_eq!(m[(2 * i, 2 * j + 1)], 0.0);
                assert_eq!(m[(2 * i + 1, 2 * j)], 0.0);
            }
        }
        out
    }

    #[test]
    fn transparent_splitter_is_identity() {
        assert_eq!(beam_splitter(0.0).unwrap(), Mat::identity(6, 6));
        assert_eq!(loss_stage(0.0).unwrap(), Mat::identity(6, 6));
    }

    #[test]
    fn full_reflection_swaps_channels() {
        let t = blocks_of(&beam_splitter(1.0).unwrap());
        assert_eq!(t, [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let l = blocks_of(&loss_stage(1.0).unwrap());
        assert_eq!(l, [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]);
    }

    #[test]
    fn splitter_layout_matches_displayed_form() {
        let t = blocks_of(&beam_splitter(0.36).unwrap());
        assert_abs_diff_eq!(t[0][0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(t[0][1], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][0], -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1][1], 0.8, epsilon = 1e-15);
        assert_eq!(t[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn out_of_range_reflectivities_rejected() {
        assert!(beam_splitter(-0.1).is_err());
        assert!(beam_splitter(1.5).is_err());
        assert!(loss_stage(f64::NAN).is_err());
        let cfg = NetworkConfig {
            beta1_sq: 0.5,
            beta2_sq: 0.0,
            delta_sq: 1.2,
            theta1: 0.0,
            theta2: 0.0,
            r: 0.0,
        };
        assert!(matches!(cfg.validate(), Err(ModelError::OutOfRange { name: "delta_sq", .. })));
    }

    #[test]
    fn homodyne_rows() {
        let d = homodyne_selectors(0.0, 0.0);
        assert_eq!(d.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let d = homodyne_selectors(FRAC_PI_2, 1.1);
        assert_abs_diff_eq!(d[(0, 0)], 0.0, epsilon = 1e-16);
        assert_eq!(d[(0, 1)], 1.0);
        for row in 0..2 {
            assert_abs_diff_eq!(d.row(row).norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn coupling_real_form() {
        let k: f64 = 4.0;
        let s = (k / 2.0).sqrt();
        let c = DVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(0.0, s),
        ]);
        let cm = CouplingMatrix::from_vector(c);
        let expected = Mat::from_row_slice(2, 4, &[0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert!((cm.cbar() - expected).amax() < 1e-15);
    }

    #[test]
    fn assembled_network_validates() {
        let c = DVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ]);
        let coupling = CouplingMatrix::from_vector(c);
        let g = Mat::identity(4, 4);
        let f = Mat::identity(4, 2);
        let cfg = NetworkConfig {
            beta1_sq: 0.4,
            beta2_sq: 0.3,
            delta_sq: 0.5,
            theta1: 0.3,
            theta2: 2.0,
            r: 1.0,
        };
        let sys = assemble_network(&cfg, &coupling, &g, &f).unwrap();
        assert!(validate_system(&sys).is_empty());
        assert_eq!(sys.channels(), 3);
        assert_eq!(sys.outputs(), 2);
        assert!(assemble_network(&cfg, &coupling, &Mat::identity(2, 2), &f).is_err());
    }
}

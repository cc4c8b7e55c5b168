//! Symplectic structure, input-noise correlation blocks and the physically
//! constrained state-space model of a linear quantum system.
//!
//! Quadratures are ordered `[q1, p1, q2, p2, ...]`. A model with `n` modes and
//! `m` input channels has a `2n`-dimensional state and a `2m`-dimensional
//! input noise increment `dW` with `dW dWᵀ = Θ dt`. Only `Re Θ` enters the
//! filter and control equations; `Im Θ` is kept for validation.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use thiserror::Error;

pub type Mat = DMatrix<f64>;

/// Absolute entrywise tolerance for every structural identity.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("mode count must be at least 1")]
    ZeroModes,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unphysical noise block (N = {n}, M = {m}): min eigenvalue of Θ is {min_eig:e}")]
    UnphysicalNoise { n: f64, m: Complex64, min_eig: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("G is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
    #[error("assembled model violates structural constraints: {0:?}")]
    Invalid(Vec<Violation>),
}

/// Block-diagonal symplectic form `Σ_n = diag{σ, ..., σ}` with `σ = [[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n: usize,
    matrix: Mat,
}

impl SymplecticForm {
    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }
}

pub fn symplectic(n: usize) -> Result<SymplecticForm, ModelError> {
    if n == 0 {
        return Err(ModelError::ZeroModes);
    }
    Ok(SymplecticForm {
        n,
        matrix: sigma_matrix(n),
    })
}

pub(crate) fn sigma_matrix(n: usize) -> Mat {
    let mut s = Mat::zeros(2 * n, 2 * n);
    for j in 0..n {
        s[(2 * j, 2 * j + 1)] = 1.0;
        s[(2 * j + 1, 2 * j)] = -1.0;
    }
    s
}

/// Itô correlation block of one input channel,
/// `Θ_j = [[N + Re M + ½, Im M + i/2], [Im M − i/2, N − Re M + ½]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBlock {
    excitation: f64,
    correlation: Complex64,
    re: Matrix2<f64>,
    im: Matrix2<f64>,
}

impl NoiseBlock {
    /// Mean excitation `N`.
    pub fn excitation(&self) -> f64 {
        self.excitation
    }

    /// Correlation parameter `M`.
    pub fn correlation(&self) -> Complex64 {
        self.correlation
    }

    pub fn re(&self) -> &Matrix2<f64> {
        &self.re
    }

    pub fn im(&self) -> &Matrix2<f64> {
        &self.im
    }

    pub fn theta(&self) -> Matrix2<Complex64> {
        Matrix2::from_fn(|i, j| Complex64::new(self.re[(i, j)], self.im[(i, j)]))
    }

    /// Smallest eigenvalue of the Hermitian block `Θ`. Non-negative exactly
    /// when `N(N + 1) ≥ |M|²`.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian2_min_eig(&self.re, &self.im)
    }
}

fn hermitian2_min_eig(re: &Matrix2<f64>, im: &Matrix2<f64>) -> f64 {
    let a = re[(0, 0)];
    let d = re[(1, 1)];
    let b = re[(0, 1)];
    let c = im[(0, 1)];
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b + c * c).sqrt()
}

fn assemble_block(n: f64, m: Complex64) -> NoiseBlock {
    let re = Matrix2::new(n + m.re + 0.5, m.im, m.im, n - m.re + 0.5);
    let im = Matrix2::new(0.0, 0.5, -0.5, 0.0);
    NoiseBlock {
        excitation: n,
        correlation: m,
        re,
        im,
    }
}

pub fn noise_block_from_nm(n: f64, m: Complex64) -> Result<NoiseBlock, ModelError> {
    let block = assemble_block(n, m);
    let min_eig = block.min_eigenvalue();
    if !(min_eig >= -STRUCTURE_TOL) {
        return Err(ModelError::UnphysicalNoise { n, m, min_eig });
    }
    Ok(block)
}

pub fn vacuum_block() -> NoiseBlock {
    assemble_block(0.0, Complex64::new(0.0, 0.0))
}

/// Pure squeezed block `½[[e^{-r}, i], [-i, e^{r}]]`.
///
/// The diagonal is filled from the exponentials directly rather than through
/// `N = (cosh r − 1)/2`, `M = −sinh r / 2`, so the block is exact for any `r`.
pub fn squeezed_theta(r: f64) -> NoiseBlock {
    let mut block = assemble_block(0.5 * (r.cosh() - 1.0), Complex64::new(-0.5 * r.sinh(), 0.0));
    block.re = Matrix2::new(0.5 * (-r).exp(), 0.0, 0.0, 0.5 * r.exp());
    block
}

/// Block-diagonal `Θ = diag{Θ_1, ..., Θ_m}` split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCorrelation {
    blocks: Vec<NoiseBlock>,
    re: Mat,
    im: Mat,
}

impl NoiseCorrelation {
    pub fn from_blocks(blocks: Vec<NoiseBlock>) -> Self {
        let m = blocks.len();
        let mut re = Mat::zeros(2 * m, 2 * m);
        let mut im = Mat::zeros(2 * m, 2 * m);
        for (j, block) in blocks.iter().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    re[(2 * j + r, 2 * j + c)] = block.re[(r, c)];
                    im[(2 * j + r, 2 * j + c)] = block.im[(r, c)];
                }
            }
        }
        Self { blocks, re, im }
    }

    pub fn channels(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[NoiseBlock] {
        &self.blocks
    }

    /// `Re Θ`, real symmetric.
    pub fn re(&self) -> &Mat {
        &self.re
    }

    /// `Im Θ`, real antisymmetric.
    pub fn im(&self) -> &Mat {
        &self.im
    }

    pub fn full(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.re.nrows(), self.re.ncols(), |i, j| {
            Complex64::new(self.re[(i, j)], self.im[(i, j)])
        })
    }
}

/// `A = Σ_n (G + Σ_nᵀ B Σ_m Bᵀ Σ_n / 2)` and `C = D Σ_m Bᵀ Σ_n`.
pub fn build_structured_matrices(g: &Mat, b: &Mat, d: &Mat) -> Result<(Mat, Mat), ModelError> {
    let (dim, dim_c) = g.shape();
    if dim != dim_c || dim % 2 != 0 || dim == 0 {
        return Err(ModelError::Dimension(format!("G must be 2n×2n, got {dim}×{dim_c}")));
    }
    if b.nrows() != dim || b.ncols() % 2 != 0 || b.ncols() == 0 {
        return Err(ModelError::Dimension(format!(
            "B must be {dim}×2m, got {}×{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if d.ncols() != b.ncols() {
        return Err(ModelError::Dimension(format!(
            "D must have {} columns, got {}",
            b.ncols(),
            d.ncols()
        )));
    }
    let asym = max_abs_diff(g, &g.transpose());
    if asym > STRUCTURE_TOL {
        return Err(ModelError::NotSymmetric(asym));
    }
    let sn = sigma_matrix(dim / 2);
    let sm = sigma_matrix(b.ncols() / 2);
    let a = &sn * (g + sn.transpose() * b * &sm * b.transpose() * &sn * 0.5);
    let c = d * &sm * b.transpose() * &sn;
    Ok((a, c))
}

/// Full state-space data of a controlled linear quantum system,
///
/// ```text
/// dx = (A + A_bath) x dt + F u dt + B dW   (+ bath noise of covariance E_bath dt)
/// dy = C x dt + D dW
/// ```
///
/// `a` and `c` always carry the structural form derived from `g`, `b`, `d`;
/// thermal-bath corrections live in `extra_drift` and `extra_diffusion`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub f: Mat,
    pub g: Mat,
    pub noise: NoiseCorrelation,
    pub extra_drift: Mat,
    pub extra_diffusion: Mat,
}

impl SystemModel {
    /// Builds `A` and `C` from `(G, B, D)` and checks every invariant.
    pub fn new(g: Mat, b: Mat, d: Mat, f: Mat, noise: NoiseCorrelation) -> Result<Self, ModelError> {
        let (a, c) = build_structured_matrices(&g, &b, &d)?;
        if noise.channels() * 2 != b.ncols() {
            return Err(ModelError::Dimension(format!(
                "noise has {} channels but B has {} columns",
                noise.channels(),
                b.ncols()
            )));
        }
        if f.nrows() != g.nrows() {
            return Err(ModelError::Dimension(format!(
                "F must have {} rows, got {}",
                g.nrows(),
                f.nrows()
            )));
        }
        let dim = g.nrows();
        let sys = Self {
            a,
            b,
            c,
            d,
            f,
            g,
            noise,
            extra_drift: Mat::zeros(dim, dim),
            extra_diffusion: Mat::zeros(dim, dim),
        };
        let violations = validate_system(&sys);
        if violations.is_empty() {
            Ok(sys)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Mode count `n`.
    pub fn modes(&self) -> usize {
        self.a.nrows() / 2
    }

    /// Input channel count `m`.
    pub fn channels(&self) -> usize {
        self.b.ncols() / 2
    }

    /// Measured output count `ℓ`.
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Effective drift `A + A_bath`.
    pub fn drift(&self) -> Mat {
        &self.a + &self.extra_drift
    }

    /// `B Re(Θ) Bᵀ + E_bath`.
    pub fn diffusion(&self) -> Mat {
        &self.b * self.noise.re() * self.b.transpose() + &self.extra_diffusion
    }

    /// Cross correlation `B Re(Θ) Dᵀ` between process and measurement noise.
    pub fn cross_correlation(&self) -> Mat {
        &self.b * self.noise.re() * self.d.transpose()
    }

    /// Innovation covariance rate `D Re(Θ) Dᵀ`.
    pub fn innovation_covariance(&self) -> Mat {
        &self.d * self.noise.re() * self.d.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension(String),
    GNotSymmetric { max_dev: f64 },
    /// `D Σ_m Dᵀ ≠ 0`.
    MeasurementCommutator { max_dev: f64 },
    /// `A` does not follow from `(G, B)`.
    DriftStructure { max_dev: f64 },
    /// `C` does not follow from `(B, D)`.
    OutputStructure { max_dev: f64 },
    NoiseBlock { channel: usize, min_eig: f64 },
    DiffusionNotPsd { min_eig: f64 },
}

/// Returns every broken invariant of `sys`; empty means the model is valid.
pub fn validate_system(sys: &SystemModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let dim = sys.g.nrows();
    let shapes_ok = sys.g.is_square()
        && dim % 2 == 0
        && dim > 0
        && sys.a.shape() == (dim, dim)
        && sys.b.nrows() == dim
        && sys.b.ncols() % 2 == 0
        && sys.d.ncols() == sys.b.ncols()
        && sys.c.shape() == (sys.d.nrows(), dim)
        && sys.noise.channels() * 2 == sys.b.ncols()
        && sys.extra_drift.shape() == (dim, dim)
        && sys.extra_diffusion.shape() == (dim, dim);
    if !shapes_ok {
        out.push(Violation::Dimension(format!(
            "G {:?}, A {:?}, B {:?}, C {:?}, D {:?}, channels {}",
            sys.g.shape(),
            sys.a.shape(),
            sys.b.shape(),
            sys.c.shape(),
            sys.d.shape(),
            sys.noise.channels()
        )));
        return out;
    }

    let asym = max_abs_diff(&sys.g, &sys.g.transpose());
    if asym > STRUCTURE_TOL {
        out.push(Violation::GNotSymmetric { max_dev: asym });
    }
    let sm = sigma_matrix(sys.channels());
    let comm = (&sys.d * &sm * sys.d.transpose()).amax();
    if comm > STRUCTURE_TOL {
        out.push(Violation::MeasurementCommutator { max_dev: comm });
    }
    let sn = sigma_matrix(sys.modes());
    let a_expected = &sn * (&sys.g + sn.transpose() * &sys.b * &sm * sys.b.transpose() * &sn * 0.5);
    let c_expected = &sys.d * &sm * sys.b.transpose() * &sn;
    let da = max_abs_diff(&sys.a, &a_expected);
    if da > STRUCTURE_TOL {
        out.push(Violation::DriftStructure { max_dev: da });
    }
    let dc = max_abs_diff(&sys.c, &c_expected);
    if dc > STRUCTURE_TOL {
        out.push(Violation::OutputStructure { max_dev: dc });
    }
    for (channel, block) in sys.noise.blocks().iter().enumerate() {
        let min_eig = block.min_eigenvalue();
        if min_eig < -STRUCTURE_TOL {
            out.push(Violation::NoiseBlock { channel, min_eig });
        }
    }
    if sys.extra_diffusion.amax() > 0.0 {
        let sym = (&sys.extra_diffusion + sys.extra_diffusion.transpose()) * 0.5;
        let min_eig = sym.symmetric_eigenvalues().min();
        if min_eig < -STRUCTURE_TOL {
            out.push(Violation::DiffusionNotPsd { min_eig });
        }
    }
    out
}

pub(crate) fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).amax()
}

pub(crate) fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the Hermitian matrix `S + iK` (`S` symmetric, `K`
/// antisymmetric), via the real embedding `[[S, −K], [K, S]]`.
pub fn hermitian_min_eigenvalue(s: &Mat, k: &Mat) -> f64 {
    let n = s.nrows();
    let mut emb = Mat::zeros(2 * n, 2 * n);
    emb.view_mut((0, 0), (n, n)).copy_from(s);
    emb.view_mut((n, n), (n, n)).copy_from(s);
    emb.view_mut((0, n), (n, n)).copy_from(&(-k));
    emb.view_mut((n, 0), (n, n)).copy_from(k);
    symmetrize(&emb).symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symplectic_single_mode_is_sigma() {
        let s = symplectic(1).unwrap();
        assert_eq!(s.matrix(), &Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn symplectic_two_modes_is_block_diagonal() {
        let s = symplectic(2).unwrap().into_matrix();
        assert_eq!(s.shape(), (4, 4));
        assert_eq!(s[(0, 1)], 1.0);
        assert_eq!(s[(3, 2)], -1.0);
        assert_eq!(s[(0, 3)], 0.0);
        assert_eq!(s[(1, 2)], 0.0);
    }

    #[test]
    fn symplectic_rejects_zero() {
        assert_eq!(symplectic(0), Err(ModelError::ZeroModes));
    }

    #[test]
    fn symplectic_identities() {
        for n in 1..=6 {
            let s = symplectic(n).unwrap().into_matrix();
            let id = Mat::identity(2 * n, 2 * n);
            assert_eq!(&s + s.transpose(), Mat::zeros(2 * n, 2 * n));
            assert_eq!(&s * &s, -&id);
            assert_eq!(&s * s.transpose(), id);
        }
    }

    #[test]
    fn vacuum_block_entries() {
        let b = noise_block_from_nm(0.0, Complex64::new(0.0, 0.0)).unwrap();
        let t = b.theta();
        assert_eq!(t[(0, 0)], Complex64::new(0.5, 0.0));
        assert_eq!(t[(0, 1)], Complex64::new(0.0, 0.5));
        assert_eq!(t[(1, 0)], Complex64::new(0.0, -0.5));
        assert_eq!(t[(1, 1)], Complex64::new(0.5, 0.0));
        assert_eq!(b, vacuum_block());
    }

    #[test]
    fn thermal_block_entries() {
        let b = noise_block_from_nm(1.0, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(b.re(), &Matrix2::new(1.5, 0.0, 0.0, 1.5));
        assert_eq!(b.im(), &Matrix2::new(0.0, 0.5, -0.5, 0.0));
    }

    #[test]
    fn commutator_entry_is_i() {
        for (n, m) in [(0.0, 0.0), (2.0, 0.3), (0.5, -0.1)] {
            let t = noise_block_from_nm(n, Complex64::new(m, 0.2 * m)).unwrap().theta();
            assert_eq!(t[(0, 1)] - t[(1, 0)], Complex64::new(0.0, 1.0));
            assert_eq!(t[(0, 1)], t[(1, 0)].conj());
        }
    }

    #[test]
    fn unphysical_block_rejected() {
        // N(N+1) = 0.75 < |M|² = 1
        let err = noise_block_from_nm(0.5, Complex64::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, ModelError::UnphysicalNoise { .. }));
        // N(N+1) = 6 ≥ |M| = 2.5 but 6 < |M|² = 6.25
        assert!(noise_block_from_nm(2.0, Complex64::new(2.5, 0.0)).is_err());
        assert!(noise_block_from_nm(2.0, Complex64::new(2.4, 0.0)).is_ok());
    }

    #[test]
    fn squeezed_at_zero_is_vacuum() {
        assert_eq!(squeezed_theta(0.0).re(), vacuum_block().re());
        assert_eq!(squeezed_theta(0.0).im(), vacuum_block().im());
    }

    #[test]
    fn squeezed_ten_db_entries() {
        // e^{±2.3}/2 to 6 digits
        let b = squeezed_theta(2.3);
        assert_abs_diff_eq!(b.re()[(0, 0)], 0.050129, epsilon = 1e-6);
        assert_abs_diff_eq!(b.re()[(1, 1)], 4.98709, epsilon = 1e-5);
        assert_abs_diff_eq!(2.0 * b.re()[(0, 0)], 0.100259, epsilon = 1e-6);
        assert_abs_diff_eq!(2.0 * b.re()[(1, 1)], 9.97418, epsilon = 1e-5);
        // 10·log10(e^r) ≈ 10 dB
        assert_abs_diff_eq!(10.0 * 2.3f64.exp().log10(), 10.0, epsilon = 0.02);
        // pure squeezing saturates the uncertainty bound
        assert_abs_diff_eq!(b.min_eigenvalue(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_matches_nm_parametrisation() {
        for r in [-2.0, -0.4, 0.0, 0.7, 2.3] {
            let from_nm = noise_block_from_nm(
                0.5 * (f64::cosh(r) - 1.0),
                Complex64::new(-0.5 * f64::sinh(r), 0.0),
            )
            .unwrap();
            let direct = squeezed_theta(r);
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(from_nm.re()[(i, j)], direct.re()[(i, j)], epsilon = 1e-12);
                    assert_eq!(from_nm.im()[(i, j)], direct.im()[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn correlation_split_reconstructs() {
        let nc = NoiseCorrelation::from_blocks(vec![squeezed_theta(1.0), vacuum_block()]);
        let full = nc.full();
        assert_eq!(full.nrows(), 4);
        assert_eq!(full[(0, 2)], Complex64::new(0.0, 0.0));
        assert_eq!(full[(2, 3)], Complex64::new(0.0, 0.5));
        assert_eq!(nc.re(), &nc.re().transpose());
        assert_eq!(nc.im(), &(-nc.im().transpose()));
    }

    fn single_mode_model(b: Mat, d: Mat) -> SystemModel {
        let g = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        SystemModel::new(
            g,
            b,
            d,
            Mat::identity(2, 2),
            NoiseCorrelation::from_blocks(vec![vacuum_block()]),
        )
        .unwrap()
    }

    #[test]
    fn zero_coupling_gives_free_drift() {
        let g = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]);
        let b = Mat::zeros(2, 2);
        let d = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let (a, c) = build_structured_matrices(&g, &b, &d).unwrap();
        assert_eq!(a, sigma_matrix(1) * &g);
        assert_eq!(c, Mat::zeros(1, 2));
    }

    #[test]
    fn pure_damping_without_hamiltonian() {
        // single mode, B = √κ Σ σ (cavity coupling), G = 0 → A = −κ/2 I
        let kappa: f64 = 3.0;
        let b = sigma_matrix(1) * sigma_matrix(1) * kappa.sqrt();
        let (a, _) = build_structured_matrices(&Mat::zeros(2, 2), &b, &Mat::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let sn = sigma_matrix(1);
        let expected = &sn * sn.transpose() * &b * &sn * b.transpose() * &sn * 0.5;
        assert!(max_abs_diff(&a, &expected) < 1e-15);
        assert!(max_abs_diff(&a, &(Mat::identity(2, 2) * (-kappa / 2.0))) < 1e-14);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = Mat::identity(2, 2);
        assert!(build_structured_matrices(&g, &Mat::zeros(4, 2), &Mat::zeros(1, 2)).is_err());
        assert!(build_structured_matrices(&g, &Mat::zeros(2, 2), &Mat::zeros(1, 4)).is_err());
        assert!(build_structured_matrices(&Mat::identity(3, 3), &Mat::zeros(3, 2), &Mat::zeros(1, 2)).is_err());
    }

    #[test]
    fn validation_flags_broken_measurement() {
        let b = sigma_matrix(1);
        let mut sys = single_mode_model(b, Mat::from_row_slice(1, 2, &[1.0, 0.0]));
        assert!(validate_system(&sys).is_empty());
        sys.d = Mat::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 1.0]);
        sys.c = &sys.d * sigma_matrix(1) * sys.b.transpose() * sigma_matrix(1);
        let v = validate_system(&sys);
        assert!(v.iter().any(|v| matches!(v, Violation::MeasurementCommutator { .. })));
    }

    #[test]
    fn validation_flags_perturbed_drift() {
        let mut sys = single_mode_model(sigma_matrix(1), Mat::from_row_slice(1, 2, &[0.0, 1.0]));
        sys.a[(0, 1)] += 1e-3;
        let v = validate_system(&sys);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::DriftStructure { max_dev } if (max_dev - 1e-3).abs() < 1e-12));
    }

    #[test]
    fn hermitian_embedding_min_eig() {
        // vacuum: ½I + (i/2)σ has eigenvalues 0 and 1
        let s = Mat::identity(2, 2) * 0.5;
        let k = sigma_matrix(1) * 0.5;
        assert_abs_diff_eq!(hermitian_min_eigenvalue(&s, &k), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hermitian_min_eigenvalue(&(s * 0.5), &k), -0.25, epsilon = 1e-14);
    }
}

//! Sweeps of the cooling bound over the BS1 reflectivity with the homodyne
//! phases optimised at every grid point, plus the flat `key = value` config
//! format and CSV output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::filter::{stationary_covariance, CovarianceMatrix, StationaryFilter};
use crate::gaussian::{Mat, ModelError};
use crate::lqg::{cheap_bound, e_min, oscillator_weight};
use crate::network::NetworkConfig;
use crate::oscillator::{build_model, default_actuation, OscillatorParams};
use crate::riccati::SolverOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: `{value}`")]
    Value { line: usize, key: String, value: String },
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything the `sweep`, `point` and `mc-check` commands read from a config
/// file.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: OscillatorParams,
    pub r: f64,
    pub beta2_sq: f64,
    pub delta_loss_sq: f64,
    pub beta1_sq_min: f64,
    pub beta1_sq_max: f64,
    pub beta1_sq_steps: usize,
    pub phase_grid: usize,
    pub refine_iters: usize,
    pub output: Option<String>,
    /// Single-point settings.
    pub beta1_sq: f64,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    /// Control weight `R = ρ I`.
    pub rho: f64,
    /// Monte Carlo step size.
    pub dt: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: OscillatorParams::default(),
            r: 2.3,
            beta2_sq: 0.0,
            delta_loss_sq: 0.9,
            beta1_sq_min: 0.0,
            beta1_sq_max: 1.0,
            beta1_sq_steps: 101,
            phase_grid: 24,
            refine_iters: 30,
            output: None,
            beta1_sq: 1.0,
            theta1: None,
            theta2: None,
            rho: 1e-2,
            dt: 1e-3,
        }
    }
}

impl SweepConfig {
    /// Parses `key = value` lines; `#` starts a comment. Keys absent from the
    /// text keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::Value {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            let num = || value.parse::<f64>().map_err(|_| bad());
            let count = || value.parse::<usize>().map_err(|_| bad());
            match key {
                "omega" => cfg.model.omega = num()?,
                "lambda" => cfg.model.lambda = num()?,
                "kappa" => cfg.model.kappa = num()?,
                "delta_detuning" => cfg.model.delta_detuning = num()?,
                "gamma" => cfg.model.gamma = num()?,
                "nbar" => cfg.model.nbar = num()?,
                "r" => cfg.r = num()?,
                "beta2_sq" => cfg.beta2_sq = num()?,
                "delta_loss_sq" => cfg.delta_loss_sq = num()?,
                "beta1_sq_min" => cfg.beta1_sq_min = num()?,
                "beta1_sq_max" => cfg.beta1_sq_max = num()?,
                "beta1_sq_steps" => cfg.beta1_sq_steps = count()?,
                "phase_grid" => cfg.phase_grid = count()?,
                "refine_iters" => cfg.refine_iters = count()?,
                "output" => cfg.output = Some(value.to_string()),
                "beta1_sq" => cfg.beta1_sq = num()?,
                "theta1" => cfg.theta1 = Some(num()?),
                "theta2" => cfg.theta2 = Some(num()?),
                "rho" => cfg.rho = num()?,
                "dt" => cfg.dt = num()?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    /// Uniform grid `beta1_sq_min..=beta1_sq_max` with `beta1_sq_steps` points.
    pub fn beta1_grid(&self) -> Vec<f64> {
        uniform_grid(self.beta1_sq_min, self.beta1_sq_max, self.beta1_sq_steps)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let spec = SweepSpec {
            beta1_sq_grid: self.beta1_grid(),
            beta2_sq: self.beta2_sq,
            delta_sq: self.delta_loss_sq,
            phase_grid_points: self.phase_grid,
            refine_iters: self.refine_iters,
            model: self.model,
            r: self.r,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Network for the single-point commands (phases default to zero).
    pub fn point_network(&self) -> NetworkConfig {
        NetworkConfig {
            beta1_sq: self.beta1_sq,
            beta2_sq: self.beta2_sq,
            delta_sq: self.delta_loss_sq,
            theta1: self.theta1.unwrap_or(0.0),
            theta2: self.theta2.unwrap_or(0.0),
            r: self.r,
        }
    }
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive; the last point
/// is exactly `hi`.
pub fn uniform_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| {
                if i == steps - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub beta1_sq_grid: Vec<f64>,
    pub beta2_sq: f64,
    pub delta_sq: f64,
    pub phase_grid_points: usize,
    pub refine_iters: usize,
    pub model: OscillatorParams,
    pub r: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.beta1_sq_grid.is_empty() {
            return Err(ConfigError::Invalid("β₁² grid is empty".into()));
        }
        if self.phase_grid_points < 4 {
            return Err(ConfigError::Invalid(format!(
                "phase grid needs at least 4 points per axis, got {}",
                self.phase_grid_points
            )));
        }
        self.model.validate()?;
        for &b in &self.beta1_sq_grid {
            self.network(b).validate()?;
        }
        Ok(())
    }

    pub fn network(&self, beta1_sq: f64) -> NetworkConfig {
        NetworkConfig {
            beta1_sq,
            beta2_sq: self.beta2_sq,
            delta_sq: self.delta_sq,
            theta1: 0.0,
            theta2: 0.0,
            r: self.r,
        }
    }
}

/// Result of the phase search at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOptimum {
    pub theta1: f64,
    pub theta2: f64,
    pub e_min: f64,
    pub filter: StationaryFilter,
    /// Objective evaluations performed.
    pub evaluations: usize,
}

/// One phase-search objective evaluation with an optional warm start.
pub fn evaluate_phases(
    params: &OscillatorParams,
    cfg: &NetworkConfig,
    f: &Mat,
    warm: Option<&Mat>,
) -> Option<StationaryFilter> {
    let sys = build_model(params, cfg, f).ok()?;
    let opts = match warm {
        Some(v) => SolverOptions::default().with_initial(v.clone()),
        None => SolverOptions::default(),
    };
    let filter = stationary_covariance(&sys, &opts).ok()?;
    if filter.residual() <= SolverOptions::default().residual_tol {
        Some(filter)
    } else {
        None
    }
}

/// Minimises `e_min` over both homodyne phases: a uniform `grid_points²` grid
/// on `[0, π)²`, then `refine_iters` rounds of coordinate descent whose step
/// starts at the grid spacing and halves every round. Phases are reported in
/// `[0, π)`. Returns `None` when no evaluation converged.
pub fn optimize_phases(
    params: &OscillatorParams,
    base: &NetworkConfig,
    f: &Mat,
    grid_points: usize,
    refine_iters: usize,
) -> Option<PhaseOptimum> {
    let spacing = PI / grid_points as f64;
    let mut evaluations = 0usize;
    let mut best: Option<(f64, f64, f64, StationaryFilter)> = None;
    let mut warm: Option<Mat> = None;

    for i in 0..grid_points {
        for j in 0..grid_points {
            let (t1, t2) = (i as f64 * spacing, j as f64 * spacing);
            evaluations += 1;
            if let Some(filter) = evaluate_phases(params, &base.with_phases(t1, t2), f, warm.as_ref()) {
                let e = e_min(&filter.covariance);
                warm = Some(filter.covariance.matrix().clone());
                if best.as_ref().map_or(true, |b| e < b.2) {
                    best = Some((t1, t2, e, filter));
                }
            }
        }
    }

    let (mut t1, mut t2, mut e, mut filter) = best?;
    let mut step = spacing;
    for _ in 0..refine_iters {
        for axis in 0..2 {
            for sign in [1.0, -1.0] {
                let (c1, c2) = if axis == 0 {
                    (wrap_phase(t1 + sign * step), t2)
                } else {
                    (t1, wrap_phase(t2 + sign * step))
                };
                evaluations += 1;
                let warm = filter.covariance.matrix().clone();
                if let Some(cand) = evaluate_phases(params, &base.with_phases(c1, c2), f, Some(&warm)) {
                    let ce = e_min(&cand.covariance);
                    if ce < e {
                        t1 = c1;
                        t2 = c2;
                        e = ce;
                        filter = cand;
                        break;
                    }
                }
            }
        }
        step *= 0.5;
    }

    Some(PhaseOptimum {
        theta1: t1,
        theta2: t2,
        e_min: e,
        filter,
        evaluations,
    })
}

/// Homodyne phases are defined modulo `π` (sign of the quadrature).
fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(PI);
    if w >= PI {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta1_sq: f64,
    pub theta1_opt: f64,
    pub theta2_opt: f64,
    pub e_min: f64,
    pub cheap_bound: f64,
    pub residual: f64,
    pub converged: bool,
}

impl SweepRow {
    fn failed(beta1_sq: f64) -> Self {
        Self {
            beta1_sq,
            theta1_opt: f64::NAN,
            theta2_opt: f64::NAN,
            e_min: f64::NAN,
            cheap_bound: f64::NAN,
            residual: f64::NAN,
            converged: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// Row with the smallest `e_min` among converged rows.
    pub fn argmin(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.converged)
            .min_by(|a, b| a.e_min.total_cmp(&b.e_min))
    }

    pub fn argmax(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.converged)
            .max_by(|a, b| a.e_min.total_cmp(&b.e_min))
    }
}

/// One sweep row with its stationary filter.
pub fn sweep_point(spec: &SweepSpec, beta1_sq: f64) -> (SweepRow, Option<CovarianceMatrix>) {
    let f = default_actuation();
    match optimize_phases(
        &spec.model,
        &spec.network(beta1_sq),
        &f,
        spec.phase_grid_points,
        spec.refine_iters,
    ) {
        Some(opt) => {
            let q = oscillator_weight(opt.filter.covariance.dim());
            let row = SweepRow {
                beta1_sq,
                theta1_opt: opt.theta1,
                theta2_opt: opt.theta2,
                e_min: opt.e_min,
                cheap_bound: cheap_bound(&opt.filter.covariance, &q),
                residual: opt.filter.residual(),
                converged: true,
            };
            (row, Some(opt.filter.covariance))
        }
        None => (SweepRow::failed(beta1_sq), None),
    }
}

/// Evaluates every grid row. Rows are independent; with the `parallel`
/// feature they run on the current rayon pool and are collected in grid
/// order.
pub fn run_sweep(spec: &SweepSpec) -> SweepResult {
    run_sweep_with_progress(spec, |_, _| {})
}

/// As [`run_sweep`], calling `progress(index, row)` as rows finish (in
/// completion order).
pub fn run_sweep_with_progress<P>(spec: &SweepSpec, progress: P) -> SweepResult
where
    P: Fn(usize, &SweepRow) + Sync,
{
    let eval = |(i, &b): (usize, &f64)| {
        let (row, _) = sweep_point(spec, b);
        progress(i, &row);
        row
    };
    #[cfg(feature = "parallel")]
    let rows = {
        use rayon::prelude::*;
        spec.beta1_sq_grid.par_iter().enumerate().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows = spec.beta1_sq_grid.iter().enumerate().map(eval).collect();
    SweepResult { rows }
}

pub const CSV_HEADER: &str = "beta1_sq,theta1_opt,theta2_opt,e_min,cheap_bound,residual,converged";

fn fmt_num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        let _ = write!(out, "{v:.15e}");
    }
}

/// CSV text: header plus one line per row, numbers in scientific notation
/// with 16 significant digits.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        for v in [
            row.beta1_sq,
            row.theta1_opt,
            row.theta2_opt,
            row.e_min,
            row.cheap_bound,
            row.residual,
        ] {
            fmt_num(&mut out, v);
            out.push(',');
        }
        out.push_str(if row.converged { "true" } else { "false" });
        out.push('\n');
    }
    out
}

pub fn write_csv<W: Write>(result: &SweepResult, mut w: W) -> io::Result<()> {
    w.write_all(to_csv(result).as_bytes())?;
    w.flush()
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> io::Result<()> {
    std::fs::write(path, to_csv(result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config_keys() {
        let text = "# default operating point\n\
                    omega = 1\nlambda = 0.3 # coupling\nkappa=4\ndelta_detuning = 1\n\
                    gamma = 1e-7\nnbar = 1e5\nr = 2.3\nbeta2_sq = 0.2\ndelta_loss_sq = 0.9\n\
                    beta1_sq_min = 0.1\nbeta1_sq_max = 0.9\nbeta1_sq_steps = 9\n\
                    phase_grid = 12\nrefine_iters = 5\noutput = out/fig4.csv\n";
        let cfg = SweepConfig::parse(text).unwrap();
        assert_eq!(cfg.model, OscillatorParams::default());
        assert_eq!(cfg.beta2_sq, 0.2);
        assert_eq!(cfg.phase_grid, 12);
        assert_eq!(cfg.output.as_deref(), Some("out/fig4.csv"));
        let grid = cfg.beta1_grid();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[8], 0.9);
        assert!((grid[4] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(SweepConfig::parse("kappa 4"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            SweepConfig::parse("\nfoo = 1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(SweepConfig::parse("kappa = four"), Err(ConfigError::Value { .. })));
        assert!(matches!(SweepConfig::parse("phase_grid = 2.5"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn spec_validation() {
        let mut cfg = SweepConfig {
            phase_grid: 3,
            ..SweepConfig::default()
        };
        assert!(cfg.sweep_spec().is_err());
        cfg.phase_grid = 4;
        cfg.beta1_sq_steps = 0;
        assert!(cfg.sweep_spec().is_err());
        cfg.beta1_sq_steps = 3;
        cfg.beta1_sq_max = 1.5;
        assert!(cfg.sweep_spec().is_err());
    }

    #[test]
    fn default_grid_is_101_points() {
        let g = SweepConfig::default().beta1_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[100], 1.0);
        assert!((g[65] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn phase_wrapping() {
        assert_eq!(wrap_phase(-0.1), PI - 0.1);
        assert!((wrap_phase(PI + 0.2) - 0.2).abs() < 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn csv_shapes() {
        let empty = SweepResult::default();
        assert_eq!(to_csv(&empty), format!("{CSV_HEADER}\n"));
        let one = SweepResult {
            rows: vec![SweepRow {
                beta1_sq: 0.5,
                theta1_opt: 0.25,
                theta2_opt: 1.0,
                e_min: 0.123456789012345,
                cheap_bound: 1.24691357802469,
                residual: 1e-13,
                converged: true,
            }],
        };
        let text = to_csv(&one);
        assert_eq!(text.lines().count(), 2);
        let line = text.lines().nth(1).unwrap();
        assert!(line.starts_with("5.000000000000000e-1,2.500000000000000e-1,"));
        assert!(line.contains("1.234567890123450e-1"));
        assert!(line.ends_with(",true"));
        let failed = SweepResult {
            rows: vec![SweepRow::failed(0.3)],
        };
        assert!(to_csv(&failed).lines().nth(1).unwrap().ends_with("NaN,NaN,false"));
    }
}

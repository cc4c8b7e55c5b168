//! Browser bindings for the interactive demo in `www/`.
//!
//! Three operations are exposed: the optimised cooling curve over the BS1
//! reflectivity, the phase landscape at a fixed reflectivity, and the full
//! stationary solution at one setting. Results are flat `Float64Array`s.

use std::f64::consts::PI;

use entangled_lqg::filter::stationary_covariance;
use entangled_lqg::lqg::e_min;
use entangled_lqg::network::NetworkConfig;
use entangled_lqg::oscillator::{build_model, default_actuation, OscillatorParams};
use entangled_lqg::riccati::SolverOptions;
use entangled_lqg::sweep::{evaluate_phases, optimize_phases, uniform_grid};
use wasm_bindgen::prelude::*;

fn network(beta1_sq: f64, beta2_sq: f64, delta_sq: f64, r: f64) -> Result<NetworkConfig, String> {
    for (name, v) in [("beta1_sq", beta1_sq), ("beta2_sq", beta2_sq), ("delta_sq", delta_sq)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{name} must lie in [0, 1], got {v}"));
        }
    }
    if !r.is_finite() {
        return Err(format!("squeezing must be finite, got {r}"));
    }
    Ok(NetworkConfig {
        beta1_sq,
        beta2_sq,
        delta_sq,
        theta1: 0.0,
        theta2: 0.0,
        r,
    })
}

/// `[β₁², e_min, θ₁, θ₂]` per point; `NaN` where no phase converged.
pub fn curve(beta2_sq: f64, delta_sq: f64, r: f64, points: usize, phase_grid: usize) -> Result<Vec<f64>, String> {
    let params = OscillatorParams::default();
    let f = default_actuation();
    let mut out = Vec::with_capacity(4 * points);
    for b in uniform_grid(0.0, 1.0, points) {
        let base = network(b, beta2_sq, delta_sq, r)?;
        match optimize_phases(&params, &base, &f, phase_grid.max(4), 12) {
            Some(opt) => out.extend([b, opt.e_min, opt.theta1, opt.theta2]),
            None => out.extend([b, f64::NAN, f64::NAN, f64::NAN]),
        }
    }
    Ok(out)
}

/// Row-major `n × n` grid of `e_min` over `θ₁ (rows), θ₂ (cols) ∈ [0, π)`.
pub fn landscape(beta1_sq: f64, beta2_sq: f64, delta_sq: f64, r: f64, n: usize) -> Result<Vec<f64>, String> {
    let params = OscillatorParams::default();
    let f = default_actuation();
    let base = network(beta1_sq, beta2_sq, delta_sq, r)?;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut warm = None;
        for j in 0..n {
            let cfg = NetworkConfig {
                theta1: PI * i as f64 / n as f64,
                theta2: PI * j as f64 / n as f64,
                ..base
            };
            match evaluate_phases(&params, &cfg, &f, warm.as_ref()) {
                Some(filter) => {
                    out.push(e_min(&filter.covariance));
                    warm = Some(filter.covariance.into_matrix());
                }
                None => {
                    out.push(f64::NAN);
                    warm = None;
                }
            }
        }
    }
    Ok(out)
}

/// `[e_min, residual, uncertainty margin, error abscissa, V (row-major)]`.
pub fn solve_point(
    beta1_sq: f64,
    beta2_sq: f64,
    delta_sq: f64,
    r: f64,
    theta1: f64,
    theta2: f64,
) -> Result<Vec<f64>, String> {
    let cfg = NetworkConfig {
        theta1,
        theta2,
        ..network(beta1_sq, beta2_sq, delta_sq, r)?
    };
    let sys = build_model(&OscillatorParams::default(), &cfg, &default_actuation()).map_err(|e| e.to_string())?;
    let filter = stationary_covariance(&sys, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let v = filter.covariance.matrix();
    let mut out = vec![
        e_min(&filter.covariance),
        filter.residual(),
        filter.covariance.uncertainty_margin(),
        filter.solution.diagnostics.closed_loop_abscissa,
    ];
    out.extend(v.transpose().iter());
    Ok(out)
}

#[wasm_bindgen(js_name = eminCurve)]
pub fn emin_curve(beta2_sq: f64, delta_sq: f64, r: f64, points: usize, phase_grid: usize) -> Result<Vec<f64>, JsError> {
    curve(beta2_sq, delta_sq, r, points, phase_grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = phaseLandscape)]
pub fn phase_landscape(beta1_sq: f64, beta2_sq: f64, delta_sq: f64, r: f64, n: usize) -> Result<Vec<f64>, JsError> {
    landscape(beta1_sq, beta2_sq, delta_sq, r, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pointSolution)]
pub fn point_solution(
    beta1_sq: f64,
    beta2_sq: f64,
    delta_sq: f64,
    r: f64,
    theta1: f64,
    theta2: f64,
) -> Result<Vec<f64>, JsError> {
    solve_point(beta1_sq, beta2_sq, delta_sq, r, theta1, theta2).map_err(|e| JsError::new(&e))
}

//! Stationary solutions of continuous Riccati differential equations
//!
//! ```text
//! dX/dt = a X + X aᵀ + w − (X cᵀ + s) r⁻¹ (X cᵀ + s)ᵀ
//! ```
//!
//! The filter covariance equation has this form directly; the control
//! equation is its dual `(Aᵀ, Fᵀ, Q, 0, R)` in reversed time.
//!
//! The flow is integrated with an embedded Dormand–Prince 5(4) pair. Once the
//! iterate is stabilizing (closed loop `a − K(X) c` Hurwitz), Newton steps on
//! the algebraic equation are taken, and integration then resumes until the
//! right-hand side stays below `residual_tol` for `confirm_steps` consecutive
//! accepted steps.

use thiserror::Error;

use crate::gaussian::{symmetrize, Mat};
use crate::linalg::{is_hurwitz, lyapunov_unchecked, spectral_abscissa};

/// Largest accepted condition number of the weight `r`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("weight matrix is singular or ill-conditioned (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("no steady state after t = {time}, {steps} steps (residual {residual:e})")]
    NotConverged {
        time: f64,
        steps: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("solution diverged at t = {time}")]
    Diverged { time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refinement {
    /// Pure time integration.
    None,
    /// Newton steps once the iterate is stabilizing and its residual is at
    /// most `switch_residual`.
    Newton { switch_residual: f64, max_iters: usize },
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement::Newton {
            switch_residual: f64::INFINITY,
            max_iters: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Steady state requires `‖rhs‖_max` below this.
    pub residual_tol: f64,
    pub confirm_steps: usize,
    pub max_steps: usize,
    pub max_time: f64,
    pub refinement: Refinement,
    /// Initial condition; each caller supplies its own default.
    pub initial: Option<Mat>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            residual_tol: 1e-10,
            confirm_steps: 3,
            max_steps: 2_000_000,
            max_time: 1e9,
            refinement: Refinement::default(),
            initial: None,
        }
    }
}

impl SolverOptions {
    pub fn with_initial(mut self, x0: Mat) -> Self {
        self.initial = Some(x0);
        self
    }

    pub fn pure_ode() -> Self {
        Self {
            refinement: Refinement::None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Final `‖rhs‖_max`.
    pub residual: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iters: usize,
    /// Integrated time.
    pub time: f64,
    /// Spectral abscissa of the closed loop `a − K c` at the solution.
    pub closed_loop_abscissa: f64,
    /// Residual after each accepted step (capped in length).
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub x: Mat,
    pub diagnostics: Diagnostics,
}

const HISTORY_CAP: usize = 20_000;

#[derive(Debug, Clone)]
pub struct RiccatiProblem {
    a: Mat,
    w: Mat,
    c: Mat,
    s: Mat,
    r_inv: Mat,
}

impl RiccatiProblem {
    pub fn new(a: Mat, w: Mat, c: Mat, s: Mat, r: Mat) -> Result<Self, SolverError> {
        let n = a.nrows();
        let k = r.nrows();
        if !a.is_square()
            || w.shape() != (n, n)
            || c.shape() != (k, n)
            || s.shape() != (n, k)
            || !r.is_square()
        {
            return Err(SolverError::Dimension(format!(
                "a {:?}, w {:?}, c {:?}, s {:?}, r {:?}",
                a.shape(),
                w.shape(),
                c.shape(),
                s.shape(),
                r.shape()
            )));
        }
        let condition = condition_number(&r);
        if !(condition <= MAX_CONDITION) {
            return Err(SolverError::IllConditioned { condition });
        }
        let r_inv = symmetrize(&r.try_inverse().ok_or(SolverError::IllConditioned { condition })?);
        Ok(Self { a, w, c, s, r_inv })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `K(X) = (X cᵀ + s) r⁻¹`.
    pub fn gain(&self, x: &Mat) -> Mat {
        (x * self.c.transpose() + &self.s) * &self.r_inv
    }

    pub fn closed_loop(&self, x: &Mat) -> Mat {
        &self.a - self.gain(x) * &self.c
    }

    pub fn rhs(&self, x: &Mat) -> Mat {
        let l = x * self.c.transpose() + &self.s;
        let raw = &self.a * x + x * self.a.transpose() + &self.w - &l * &self.r_inv * l.transpose();
        symmetrize(&raw)
    }

    pub fn residual(&self, x: &Mat) -> f64 {
        self.rhs(x).amax()
    }

    fn is_stabilizing(&self, x: &Mat) -> bool {
        is_hurwitz(&self.closed_loop(x))
    }

    /// Newton iteration on `rhs(X) = 0`; each step solves
    /// `(a − Kc) Δ + Δ (a − Kc)ᵀ = −rhs(X)`.
    fn newton(&self, x0: &Mat, target: f64, max_iters: usize) -> Option<(Mat, usize)> {
        let mut x = x0.clone();
        let mut res = self.residual(&x);
        let mut iters = 0;
        let mut stalled = 0;
        while iters < max_iters && res > target {
            let acl = self.closed_loop(&x);
            let delta = lyapunov_unchecked(&acl, &self.rhs(&x)).ok()?;
            let next = symmetrize(&(&x + delta));
            if next.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let next_res = self.residual(&next);
            iters += 1;
            if next_res >= res {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            } else {
                stalled = 0;
            }
            x = next;
            res = next_res;
        }
        if self.is_stabilizing(&x) {
            Some((x, iters))
        } else {
            None
        }
    }

    /// Integrates from `opts.initial` (zero if absent) to steady state.
    pub fn solve(&self, opts: &SolverOptions) -> Result<RiccatiSolution, SolverError> {
        let n = self.dim();
        let mut x = match &opts.initial {
            Some(x0) if x0.shape() == (n, n) => symmetrize(x0),
            Some(x0) => {
                return Err(SolverError::Dimension(format!(
                    "initial condition {:?}, expected {n}×{n}",
                    x0.shape()
                )))
            }
            None => Mat::zeros(n, n),
        };

        let mut history = Vec::new();
        let mut t = 0.0;
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        let mut newton_iters = 0usize;
        let mut consecutive = 0usize;
        // tolerance tightening once the residual plateaus at the stability limit
        let mut tol_scale = 1.0f64;
        let mut best = f64::INFINITY;
        let mut since_best = 0usize;
        let mut newton_state = match opts.refinement {
            Refinement::None => NewtonState::Disabled,
            Refinement::Newton { .. } => NewtonState::Pending { next_check: 0 },
        };

        let mut k1 = self.rhs(&x);
        let mut res = k1.amax();
        let mut h = initial_step(&x, res);

        loop {
            if let (
                NewtonState::Pending { next_check },
                Refinement::Newton {
                    switch_residual,
                    max_iters,
                },
            ) = (newton_state, opts.refinement)
            {
                if accepted >= next_check && res <= switch_residual {
                    if self.is_stabilizing(&x) {
                        match self.newton(&x, opts.residual_tol * 1e-3, max_iters) {
                            Some((xn, it)) => {
                                newton_iters += it;
                                x = xn;
                                k1 = self.rhs(&x);
                                res = k1.amax();
                                h = initial_step(&x, res).max(h);
                                newton_state = NewtonState::Done;
                                if res < opts.residual_tol {
                                    // a fixed point of the flow needs no further steps
                                    break;
                                }
                            }
                            None => newton_state = NewtonState::Done,
                        }
                    } else {
                        newton_state = NewtonState::Pending {
                            next_check: accepted + 10,
                        };
                    }
                }
            }

            if accepted >= opts.max_steps || t >= opts.max_time {
                return Err(SolverError::NotConverged {
                    time: t,
                    steps: accepted,
                    residual: res,
                    history,
                });
            }

            let (x_new, err) = self.dopri_step(&x, &k1, h, opts, tol_scale);
            if !err.is_finite() || x_new.iter().any(|v| !v.is_finite()) {
                if h < 1e-14 {
                    return Err(SolverError::Diverged { time: t });
                }
                h *= 0.25;
                rejected += 1;
                continue;
            }
            if err <= 1.0 {
                t += h;
                x = x_new;
                k1 = self.rhs(&x);
                res = k1.amax();
                accepted += 1;
                if history.len() < HISTORY_CAP {
                    history.push(res);
                }
                if res < 0.5 * best {
                    best = res;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= PLATEAU_STEPS && tol_scale > MIN_TOL_SCALE {
                        tol_scale *= 0.1;
                        since_best = 0;
                    }
                }
                if res < opts.residual_tol {
                    consecutive += 1;
                    if consecutive >= opts.confirm_steps {
                        break;
                    }
                } else {
                    consecutive = 0;
                }
                if x.amax() > 1e150 {
                    return Err(SolverError::Diverged { time: t });
                }
            } else {
                rejected += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        }

        let closed_loop_abscissa = spectral_abscissa(&self.closed_loop(&x));
        Ok(RiccatiSolution {
            x,
            diagnostics: Diagnostics {
                residual: res,
                accepted_steps: accepted,
                rejected_steps: rejected,
                newton_iters,
                time: t,
                closed_loop_abscissa,
                residual_history: history,
            },
        })
    }

    /// One Dormand–Prince step; returns the 5th-order solution and the scaled
    /// error norm of the embedded 4th-order estimate.
    fn dopri_step(&self, x: &Mat, k1: &Mat, h: f64, opts: &SolverOptions, tol_scale: f64) -> (Mat, f64) {
        let k2 = self.rhs(&(x + k1 * (h * A21)));
        let k3 = self.rhs(&(x + (k1 * A31 + &k2 * A32) * h));
        let k4 = self.rhs(&(x + (k1 * A41 + &k2 * A42 + &k3 * A43) * h));
        let k5 = self.rhs(&(x + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
        let k6 = self.rhs(&(x + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h));
        let x5 = x + (k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = self.rhs(&x5);
        let diff = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let mut err = 0.0f64;
        for ((d, a), b) in diff.iter().zip(x.iter()).zip(x5.iter()) {
            let scale = tol_scale * (opts.abs_tol + opts.rel_tol * a.abs().max(b.abs()));
            err = err.max(d.abs() / scale);
        }
        (symmetrize(&x5), err)
    }
}

const PLATEAU_STEPS: usize = 50;
const MIN_TOL_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
enum NewtonState {
    Disabled,
    Pending { next_check: usize },
    Done,
}

fn initial_step(x: &Mat, res: f64) -> f64 {
    let scale = x.amax().max(1.0);
    if res == 0.0 {
        1.0
    } else {
        (1e-3 * scale / res).clamp(1e-8, 1.0)
    }
}

fn condition_number(r: &Mat) -> f64 {
    let sv = r.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (5th minus embedded 4th order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

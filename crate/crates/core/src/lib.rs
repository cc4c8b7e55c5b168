//! Linear quantum stochastic systems, coherent-feedback networks and LQG
//! cooling of a mechanical oscillator.
//!
//! The pipeline is: build a [`network::NetworkConfig`], assemble the
//! [`gaussian::SystemModel`] with [`oscillator::build_model`], solve the
//! stationary filter with [`filter::stationary_covariance`], then read off
//! [`lqg::e_min`] or solve the full LQG problem with [`lqg::solve_lqg`].

pub mod filter;
pub mod gaussian;
pub mod linalg;
pub mod lqg;
pub mod mc;
pub mod network;
pub mod oscillator;
pub mod riccati;
pub mod sweep;

pub use filter::{stationary_covariance, CovarianceMatrix, FilterGain, StationaryFilter};
pub use gaussian::{Mat, ModelError, NoiseCorrelation, SystemModel};
pub use lqg::{e_min, solve_lqg, CostWeights};
pub use network::NetworkConfig;
pub use oscillator::{build_model, default_actuation, OscillatorParams};
pub use riccati::{SolverError, SolverOptions};
pub use sweep::{run_sweep, SweepConfig, SweepResult};

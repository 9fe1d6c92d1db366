//! A numerical laboratory for the 1D viscoelastic wave equation with
//! infinite memory and a dynamic boundary.
//!
//! The displacement u on (0, 1) obeys
//!
//! ```text
//! u_tt - u_xx + int_0^inf g(s) u_xx(t - s) ds = 0
//! ```
//!
//! with u clamped at x = 0 and a tip mass at x = 1 accelerating under the
//! memory-consistent flux. The convolution is rewritten through the running
//! history eta^t(x, s) = u(x, t) - u(x, t - s), which turns the problem into
//! a first-order system V = (u, v, eta) with a transport equation in the age
//! variable s and a dissipative generator on a weighted phase space.
//!
//! What the crate provides, module by module:
//!
//! - [`kernel`]: relaxation kernels g, the admissibility gate
//!   (nonnegativity, total mass below 1, pinched exponential decay), Laplace
//!   transforms and tail masses.
//! - [`mesh`]: P1 finite elements on (0, 1) with the clamped/dynamic node
//!   pair, consistent mass, tip-mass augmentation, discrete flux and trace
//!   constant.
//! - [`history`]: the age grid, quadrature of the memory norm, upwind
//!   transport and history initialization from prescribed pasts.
//! - [`dynamics`]: the coupled first-order system, its energies and
//!   H-inner product, the implicit midpoint stepper (resolvent-based, with a
//!   cached reduced factorization), the dense generator matrix, and the two
//!   independent memory formulations (direct convolution and the exact
//!   exponential-kernel reduction) used as cross-checks.
//! - [`analysis`]: energy records along trajectories, decay-rate fits,
//!   eigenvalue certificates, dense and reduced resolvents, and the
//!   H-weighted resolvent sweep along the imaginary axis.
//! - [`config`] and [`commands`]: the TOML run configuration and the four
//!   operations exposed by the thin CLI (verify-kernel, simulate, spectrum,
//!   triad).
//!
//! Every major capability has a runnable example under `examples/`.

pub mod analysis;
pub mod commands;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod history;
pub mod kernel;
pub mod mesh;

pub use error::{Error, Result};

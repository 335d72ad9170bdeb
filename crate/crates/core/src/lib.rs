//! Pseudo-spectral toolkit for critical (order one) nonlocal parabolic
//! equations on the periodic torus.
//!
//! The crate is layered bottom-up:
//!
//! * [`spectral`]: grids, transforms, Fourier multipliers, semigroups and a
//!   Monte Carlo Cauchy-process oracle;
//! * [`norms`]: discrete Lebesgue, Sobolev and Hölder norms;
//! * [`linear`]: time stepping for `d_t u + a (-Delta)^{1/2} u + b . grad u = f`;
//! * [`quasilinear`]: Picard iteration for systems whose coefficients depend
//!   on the solution and on multiplier images of it (critical SQG included);
//! * [`nonlinear`]: `d_t u = F(t, x, u, grad u, -(-Delta)^{1/2} u)` through the
//!   gradient system for `w = grad u`;
//! * [`app`]: scenario configuration, artifacts, the verification suite and
//!   benchmarks behind the `fpde` binary.

pub mod app;
pub mod error;
pub mod linear;
pub mod nonlinear;
pub mod norms;
pub mod quasilinear;
pub mod snapshot;
pub mod spectral;
pub mod trajectory;

pub use error::{Error, Result};

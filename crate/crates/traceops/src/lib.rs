//! Numerics for Volterra-type evolution equations driven by completely
//! monotone kernels.
//!
//! The crate implements a calculus of dilation-scaling functions, kernel ↔
//! Laplace-exponent conversions, subordinator sampling and eigenfunction
//! checks, Muckenhoupt weight and Hardy-inequality machinery, real
//! interpolation functionals (K-method, sequence spaces, Lorentz and Besov
//! norms), and a constructive trace/extension round trip for Volterra
//! equations with local or non-local time derivatives. Every analytic claim
//! exposed by the API is paired with an empirical verification routine that
//! reports quantitative bands rather than booleans.
//!
//! Modules are layered bottom-up:
//!
//! * [`error`], [`special`], [`quad`], [`grid`], [`rng`], [`report`] —
//!   shared infrastructure.
//! * [`scaling`] — dilation classes `I(a,b)` / `I_o(a,b)` and transforms.
//! * [`kernel`] — completely monotone kernels `κ` and their exponents `φ`.
//! * [`subordinator`] — stable and compound-Poisson sampling, relaxation
//!   functions, Sonine pairs.
//! * [`weights`] — Muckenhoupt constants, maximal functions, Hardy
//!   inequalities, weight extension.
//! * [`interp`] — K-functionals, dyadic functionals, sequence/Lorentz/Besov
//!   norms.
//! * [`volterra`] — forward solver, trace bounds, extension operators, and
//!   the round-trip experiment battery.

pub mod error;
pub mod grid;
pub mod interp;
pub mod kernel;
pub mod quad;
pub mod report;
pub mod rng;
pub mod scaling;
pub mod special;
pub mod subordinator;
pub mod volterra;
pub mod weights;

pub use error::{Error, Result};

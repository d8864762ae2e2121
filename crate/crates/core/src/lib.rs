//! Radial basis function least-squares collocation method of lines for
//! diffusion-reaction equations on closed surfaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: modified Bessel functions `K_n` and the Whittle–Matérn–Sobolev
//!   kernel with analytic gradient and Hessian.
//! * [`geometry`]: implicit catalog surfaces, normals, closest-point retraction,
//!   point sampling and fill/separation diagnostics.
//! * [`operator`]: the divergence-form surface operator
//!   `L u = -div_S(A grad_S u) + b u` applied to ambient C² functions.
//! * [`dense`]: reduced QR, SPD and triangular solves, singular values and
//!   general eigenvalues (LAPACK backed).
//! * [`mol`]: collocation assembly, the QR-reduced mass-matrix ODE, spectra and
//!   Dormand–Prince time stepping.
//!
//! Data-parallel loops (matrix assembly, distance scans, solution evaluation)
//! run on rayon when the `parallel` feature is enabled; every such entry point
//! also accepts an [`Execution`] policy so both paths can be compared at runtime.

pub mod dense;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod mol;
pub mod operator;
mod par;

pub use error::{Error, Result};
pub use par::Execution;

/// Points of the ambient space R³.
pub type Point = nalgebra::Vector3<f64>;
